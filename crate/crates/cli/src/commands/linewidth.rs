use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use spinbath_core::constants::PhysicalConstants;
use spinbath_core::csvio::read_rows;
use spinbath_core::linewidth::{
    contact_linewidth, dipolar_linewidth, linewidth_curve, log_grid, write_curve_csv, ContactSiteSet, RegimeRule,
    DEFAULT_REGIME_SWITCH, DIPOLAR_LATTICE_COEFFICIENT_CM6,
};
use spinbath_core::numeric::Num;

use super::{in_file, prepare, read_input, Globals};
use crate::error::{CliError, CliResult};
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinewidthArgs {
    /// Lowest concentration [default: 1e-4]
    #[arg(long)]
    pub n_min: Option<f64>,
    /// Highest concentration [default: 1]
    #[arg(long)]
    pub n_max: Option<f64>,
    /// Grid points, log-spaced [default: 41]
    #[arg(long)]
    pub points: Option<usize>,
    /// Lattice-sum coefficient, cm^-6 per unit concentration [default: 3.195e46]
    #[arg(long)]
    pub coefficient_cm6: Option<f64>,
    /// Total-width rule: threshold[:<n>] or max [default: threshold:0.011]
    #[arg(long)]
    pub regime: Option<String>,
    /// Measured points to overlay, CSV with header n,w_khz
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct OverlayRow {
    n: f64,
    w_khz: f64,
}

fn parse_regime(s: &str) -> CliResult<RegimeRule> {
    match s.split_once(':') {
        None if s == "max" => Ok(RegimeRule::Max),
        None if s == "threshold" => Ok(RegimeRule::Threshold(DEFAULT_REGIME_SWITCH)),
        Some(("threshold", v)) => {
            v.parse().map(RegimeRule::Threshold).map_err(|_| CliError::Config(format!("bad regime threshold {v:?}")))
        }
        _ => Err(CliError::Config(format!("unknown regime {s:?} (threshold[:n] or max)"))),
    }
}

fn parse_overlay(path: &Path, text: &str) -> CliResult<Vec<(f64, f64)>> {
    let rows: Vec<OverlayRow> = read_rows(text).map_err(in_file(path))?;
    Ok(rows.into_iter().map(|r| (r.n, r.w_khz)).collect())
}

pub fn run(flags: &LinewidthArgs, g: &Globals) -> CliResult<()> {
    let (a, ctx) = prepare("linewidth", flags, g)?;
    let overlay = match &a.overlay {
        Some(p) => parse_overlay(p, &read_input(p)?)?,
        None => Vec::new(),
    };
    let (lo, hi) = (a.n_min.unwrap_or(1e-4), a.n_max.unwrap_or(1.0));
    for n in [lo, hi] {
        if !(n > 0.0 && n <= 1.0) {
            return Err(CliError::Core(spinbath_core::Error::Validation(format!("concentration {n} outside (0, 1]"))));
        }
    }
    if lo > hi {
        return Err(CliError::Config("n_min exceeds n_max".into()));
    }
    let rule = parse_regime(a.regime.as_deref().unwrap_or("threshold"))?;
    let coef = a.coefficient_cm6.unwrap_or(DIPOLAR_LATTICE_COEFFICIENT_CM6);
    let sites = ContactSiteSet::default();
    let curve = linewidth_curve(&log_grid(lo, hi, a.points.unwrap_or(41)), &sites, coef, rule)?;

    let notes = vec![
        format!("dipolar_coefficient_cm6: {coef:e}"),
        format!("regime: {rule:?}"),
        "contact: W = 2 sqrt(2 ln2) sqrt(n sum_k m_k (a_k/2)^2), 9 sites at 14 MHz".to_string(),
        "dipolar: W = (mu0 g_e muB g_n muN / 4 pi h) sqrt(coefficient_cm6 * 1e12 * n)".to_string(),
    ];
    ctx.write_csv("linewidth.csv", &notes, |buf| write_curve_csv(&curve, buf))?;

    let constants = PhysicalConstants::default();
    let mut residuals = Vec::new();
    for &(n, w_khz) in &overlay {
        let wc = contact_linewidth(n, &sites)? * 1e3;
        let wd = dipolar_linewidth(n, coef, &constants)? * 1e-3;
        residuals.push((n, w_khz, w_khz / wc, w_khz / wd));
    }
    if !overlay.is_empty() {
        ctx.write_csv("linewidth_overlay.csv", &[], |buf| {
            use std::io::Write;
            writeln!(buf, "n,w_khz,ratio_to_contact,ratio_to_dipolar")?;
            for (n, w, rc, rd) in &residuals {
                writeln!(buf, "{},{},{},{}", Num(*n), Num(*w), Num(*rc), Num(*rd))?;
            }
            Ok(())
        })?;
    }

    let mut series = vec![
        Series {
            name: "contact".into(),
            points: curve.iter().map(|p| (p.n, p.w_contact_mhz)).collect(),
            style: Style::Line,
        },
        Series {
            name: "dipolar".into(),
            points: curve.iter().map(|p| (p.n, p.w_dipolar_mhz)).collect(),
            style: Style::Line,
        },
    ];
    if !overlay.is_empty() {
        series.push(Series {
            name: "measured".into(),
            points: overlay.iter().map(|&(n, w)| (n, w * 1e-3)).collect(),
            style: Style::Markers,
        });
    }
    let plot = Plot {
        title: "Inhomogeneous linewidth".into(),
        x_label: "13C concentration n".into(),
        y_label: "FWHM (MHz)".into(),
        log_x: true,
        log_y: true,
        series,
    };
    ctx.write_svg("linewidth.svg", &plot.render())?;

    for (n, w, rc, rd) in &residuals {
        println!("overlay n={n}: {w} kHz = {rc:.3} x contact, {rd:.3} x dipolar");
    }
    ctx.print_written();
    Ok(())
}
