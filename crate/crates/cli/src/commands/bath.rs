use std::fmt::Write as _;
use std::io::Write as _;

use clap::Args;
use serde::{Deserialize, Serialize};
use spinbath_core::decoherence::{
    bath_fid_simulate, fid_span, fit_decay, BathPairCouplings, CoherenceKind, FitOptions, ModelKind,
    DEFAULT_NEAR_RADIUS,
};
use spinbath_core::lattice::{sample_bath, shell_occupancy_probability, shells_within, write_sites_csv};
use spinbath_core::linewidth::{dipolar_second_moment_sum, DIPOLAR_LATTICE_COEFFICIENT_CM6};
use spinbath_core::numeric::Num;

use super::{linear_grid, prepare, Globals};
use crate::error::CliResult;
use crate::output::Context;
use crate::svg::{Plot, Series, Style};

/// Shells 1 and 2 are the strongly coupled sites, which are not part of the
/// dipolar continuum.
const EXCLUDED_SHELLS: [u32; 2] = [1, 2];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathArgs {
    /// Lattice radius around the vacancy, Å [default: 20]
    #[arg(long)]
    pub radius: Option<f64>,
    /// 13C concentration for the random bath [default: 0.011]
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Also simulate the two-nucleus FID over this many bath realizations
    #[arg(long)]
    pub fid_samples: Option<usize>,
    /// Bath radius around each register nucleus for the FID, Å [default: 10]
    #[arg(long)]
    pub near_radius: Option<f64>,
    /// FID time points [default: 200]
    #[arg(long)]
    pub fid_points: Option<usize>,
    /// FID time span, us [default: doubled from 4 / rms SQ1 offset until SQ1 < 0.1]
    #[arg(long)]
    pub fid_t_max_us: Option<f64>,
}

pub fn run(flags: &BathArgs, g: &Globals) -> CliResult<()> {
    let (a, ctx) = prepare("bath", flags, g)?;
    let radius = a.radius.unwrap_or(20.0);
    let n = a.concentration.unwrap_or(0.011);
    if !(0.0..=1.0).contains(&n) {
        return Err(spinbath_core::Error::Validation(format!("concentration {n} outside [0, 1]")).into());
    }
    let shells = shells_within(radius)?;
    let sample = sample_bath(&shells.sites, n, ctx.seed)?;

    let mut report = String::new();
    let _ = writeln!(report, "radius_angstrom: {radius}");
    let _ = writeln!(report, "sites: {}", shells.sites.len());
    for w in &shells.warnings {
        let _ = writeln!(report, "warning: {w:?}");
    }
    let _ = writeln!(report, "concentration: {n}");
    let _ = writeln!(report, "occupied: {} (expected {:.2})", sample.len(), n * shells.sites.len() as f64);
    for k in 1..=4u32 {
        let m = shells.shell_count(k) as u32;
        let occupied = sample.occupied.iter().filter(|&&i| shells.sites[i].shell == k).count();
        let p_any = 1.0 - shell_occupancy_probability(m, n, 0)?;
        let _ = writeln!(report, "shell {k}: {m} sites, {occupied} occupied, P(any occupied) = {p_any:.6}");
    }

    let m1 = dipolar_second_moment_sum(&shells.sites, &EXCLUDED_SHELLS)?;
    let m2 = dipolar_second_moment_sum(&shells_within(2.0 * radius)?.sites, &EXCLUDED_SHELLS)?;
    let change = (m2.coefficient_cm6 / m1.coefficient_cm6 - 1.0).abs();
    let _ = writeln!(report, "second_moment_coefficient_cm6: {:.6e} ({} sites)", m1.coefficient_cm6, m1.sites_used);
    let _ = writeln!(
        report,
        "second_moment_coefficient_cm6 at 2x radius: {:.6e} ({} sites, change {:.3}%)",
        m2.coefficient_cm6,
        m2.sites_used,
        100.0 * change
    );
    let _ = writeln!(
        report,
        "ratio to reference {:e}: {:.4}",
        DIPOLAR_LATTICE_COEFFICIENT_CM6,
        m1.coefficient_cm6 / DIPOLAR_LATTICE_COEFFICIENT_CM6
    );
    let _ = writeln!(report, "convention: {}", m1.convention);

    ctx.write_csv("bath_sites.csv", &[], |buf| write_sites_csv(&shells.sites, buf))?;
    ctx.write_csv("bath_occupied.csv", &[], |buf| sample.write_csv(buf))?;
    if let Some(samples) = a.fid_samples {
        bath_fid(&a, &ctx, n, samples, &mut report)?;
    }
    ctx.write_text("bath_report.txt", &report)?;
    print!("{report}");
    ctx.print_written();
    Ok(())
}

/// Span over which the SQ1 envelope falls below 0.1: start at 4/rms of the
/// offsets and double. The offset distribution is heavy-tailed, so the rms
/// alone undershoots.
fn bath_fid(a: &BathArgs, ctx: &Context, n: f64, samples: usize, report: &mut String) -> CliResult<()> {
    let source = BathPairCouplings::first_shell_pair(n, ctx.seed, a.near_radius.unwrap_or(DEFAULT_NEAR_RADIUS))?;
    let t_max = match a.fid_t_max_us {
        Some(t) => t,
        None => fid_span(&source, samples)?,
    };
    let times = linear_grid(t_max, a.fid_points.unwrap_or(200))?;
    let curves = CoherenceKind::ALL
        .iter()
        .map(|&k| bath_fid_simulate(&source, k, &times, samples).map(|c| (k, c)))
        .collect::<spinbath_core::Result<Vec<_>>>()?;

    ctx.write_csv("bath_fid.csv", &[format!("samples: {samples}")], |buf| {
        let names: Vec<&str> = curves.iter().map(|(k, _)| k.name()).collect();
        writeln!(buf, "t_us,{}", names.join(","))?;
        for (i, t) in times.iter().enumerate() {
            let row: Vec<String> = curves.iter().map(|(_, c)| Num(c.signal[i]).to_string()).collect();
            writeln!(buf, "{},{}", Num(*t), row.join(","))?;
        }
        Ok(())
    })?;

    let _ = writeln!(report, "fid_samples: {samples}\nfid_t_max_us: {t_max}");
    let mut rates = Vec::new();
    for (k, c) in &curves {
        match fit_decay(c, ModelKind::GaussianFid, &FitOptions::default()) {
            Ok(f) => {
                let _ = writeln!(report, "fid {}: T2* = {:.6} +/- {:.6} us", k.name(), f.t_us, f.t_sigma);
                rates.push((*k, 1.0 / f.t_us));
            }
            Err(e) => {
                let _ = writeln!(report, "fid {}: no fit ({e})", k.name());
            }
        }
    }
    let rate = |kind| rates.iter().find(|(k, _)| *k == kind).map(|r| r.1);
    if let (Some(r1), Some(r2), Some(rp)) =
        (rate(CoherenceKind::Sq1), rate(CoherenceKind::Sq2), rate(CoherenceKind::Phi))
    {
        let _ = writeln!(report, "1/T_phi vs 1/T_sq1 + 1/T_sq2: {:.4}", rp / (r1 + r2));
    }

    let plot = Plot {
        title: format!("Bath FID, n = {n}"),
        x_label: "t (us)".into(),
        y_label: "coherence".into(),
        series: curves
            .iter()
            .map(|(k, c)| Series {
                name: k.name().into(),
                points: c.times_us.iter().copied().zip(c.signal.iter().copied()).collect(),
                style: Style::Line,
            })
            .collect(),
        ..Default::default()
    };
    ctx.write_svg("bath_fid.svg", &plot.render())?;
    Ok(())
}
