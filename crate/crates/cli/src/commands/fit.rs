use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use spinbath_core::csvio::read_rows;
use spinbath_core::decoherence::{
    bell_t2star_intervals, fit_decay, fit_t2_scaling, CoherenceTime, CombinationRule, DecayCurve, FitOptions,
    InitialGuess, Measured, ModelKind, ScalingSpace, TimeInterval,
};
use spinbath_core::numeric::Num;

use super::{in_file, parse_list, prepare, read_input, Globals};
use crate::error::{CliError, CliResult};
use crate::output::Context;
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// gaussian_fid, cubic_echo, inverse_n or bell [default: gaussian_fid]
    #[arg(long)]
    pub model: Option<String>,
    /// Input CSV: t_us,signal[,sigma] for decay models; n,t2_us for inverse_n
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Iteration cap for decay fits [default: 200]
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Starting parameters, comma-separated in model order [default: grid search]
    #[arg(long)]
    pub initial: Option<String>,
    /// inverse_n residual space: log or linear [default: log]
    #[arg(long)]
    pub space: Option<String>,
    /// inverse_n: extra concentrations to predict T2 at, comma-separated
    #[arg(long)]
    pub predict: Option<String>,
    /// bell: SQ1 coherence time as value:sigma, us [default: 41.1:3.1]
    #[arg(long)]
    pub sq1: Option<String>,
    /// bell: SQ2 coherence time as value:sigma, us [default: 15.8:1.4]
    #[arg(long)]
    pub sq2: Option<String>,
    /// bell: measured Psi time as value:sigma, us [default: 22.0:3.0]
    #[arg(long)]
    pub psi: Option<String>,
    /// bell: measured Phi time as value:sigma, us [default: 13.3:1.1]
    #[arg(long)]
    pub phi: Option<String>,
}

fn parse_measured(what: &str, s: &str) -> CliResult<Measured> {
    let (v, e) = s.split_once(':').unwrap_or((s, "0"));
    match (v.trim().parse::<f64>(), e.trim().parse::<f64>()) {
        (Ok(v), Ok(e)) if e >= 0.0 => Ok(Measured::symmetric(v, e)),
        _ => Err(CliError::Config(format!("{what}: expected value:sigma, got {s:?}"))),
    }
}

fn require_input(a: &FitArgs) -> CliResult<(&Path, String)> {
    let path = a.input.as_ref().ok_or_else(|| CliError::Config("--input is required for this model".into()))?;
    Ok((path, read_input(path)?))
}

pub fn run(flags: &FitArgs, g: &Globals) -> CliResult<()> {
    let (a, ctx) = prepare("fit", flags, g)?;
    match a.model.as_deref().unwrap_or("gaussian_fid") {
        "inverse_n" => run_scaling(&a, &ctx),
        "bell" => run_bell(&a, &ctx),
        other => {
            let model: ModelKind = other.parse()?;
            run_decay(&a, &ctx, model)
        }
    }?;
    ctx.print_written();
    Ok(())
}

fn run_decay(a: &FitArgs, ctx: &Context, model: ModelKind) -> CliResult<()> {
    let (path, text) = require_input(a)?;
    let curve = DecayCurve::from_csv(text.as_bytes()).map_err(in_file(path))?;
    let mut options = FitOptions::default();
    if let Some(m) = a.max_iterations {
        options.max_iterations = m;
    }
    if let Some(s) = &a.initial {
        options.initial = InitialGuess::Explicit(parse_list("initial", s)?);
    }
    let fit = fit_decay(&curve, model, &options)?;
    let mut report = fit.report();
    if fit.delta_omega_sigma.is_some_and(f64::is_infinite) {
        report.push_str("note: delta_omega consistent with 0; its uncertainty is unbounded\n");
    }
    ctx.write_text(&format!("fit_{}.txt", model.name()), &report)?;
    ctx.write_csv(&format!("fit_{}.csv", model.name()), &[], |buf| {
        writeln!(buf, "t_us,signal,model,residual")?;
        for (&t, &y) in curve.times_us.iter().zip(&curve.signal) {
            let m = fit.evaluate(t);
            writeln!(buf, "{},{},{},{}", Num(t), Num(y), Num(m), Num(y - m))?;
        }
        Ok(())
    })?;
    let plot = Plot {
        title: format!("{} fit", model.name()),
        x_label: "t (us)".into(),
        y_label: "signal".into(),
        series: vec![
            Series {
                name: "data".into(),
                points: curve.times_us.iter().copied().zip(curve.signal.iter().copied()).collect(),
                style: Style::Markers,
            },
            Series {
                name: "fit".into(),
                points: curve.times_us.iter().map(|&t| (t, fit.evaluate(t))).collect(),
                style: Style::Line,
            },
        ],
        ..Default::default()
    };
    ctx.write_svg(&format!("fit_{}.svg", model.name()), &plot.render())?;
    print!("{report}");
    Ok(())
}

/// Concentration with two labels for one sample.
const AMBIGUOUS_N: f64 = 0.0035;

#[derive(Debug, Deserialize)]
struct ScalingRow {
    n: f64,
    t2_us: f64,
}

fn run_scaling(a: &FitArgs, ctx: &Context) -> CliResult<()> {
    let (path, text) = require_input(a)?;
    let rows: Vec<ScalingRow> = read_rows(&text).map_err(in_file(path))?;
    let points: Vec<(f64, f64)> = rows.into_iter().map(|r| (r.n, r.t2_us)).collect();
    let space = match a.space.as_deref().unwrap_or("log") {
        "log" => ScalingSpace::Log,
        "linear" => ScalingSpace::Linear,
        s => return Err(CliError::Config(format!("unknown space {s:?} (log or linear)"))),
    };
    let extra = match &a.predict {
        Some(s) => parse_list("predict", s)?,
        None => Vec::new(),
    };
    let model = fit_t2_scaling(&points, space)?;
    let mut report = String::new();
    let _ = writeln!(report, "model: T2 = C / n ({space:?} residuals)");
    let _ = writeln!(report, "C_us: {:.6} +/- {:.6}", model.coefficient, model.coefficient_sigma);
    let _ = writeln!(report, "residual_norm: {:.6e}", model.residual_norm);
    for &(n, t) in &points {
        let p = model.predict(n);
        let _ =
            writeln!(report, "n={n}: measured {t} us, predicted {p:.4} us, deviation {:+.2}%", 100.0 * (p / t - 1.0));
    }
    for n in extra {
        let _ = writeln!(report, "n={n}: predicted {:.4} us", model.predict(n));
    }
    if points.iter().any(|&(n, _)| (n - AMBIGUOUS_N).abs() < 1e-12) {
        // same sample, also labelled 0.3%
        let relabelled: Vec<(f64, f64)> =
            points.iter().map(|&(n, t)| if (n - AMBIGUOUS_N).abs() < 1e-12 { (0.003, t) } else { (n, t) }).collect();
        let alt = fit_t2_scaling(&relabelled, space)?;
        let _ = writeln!(
            report,
            "note: the n=0.0035 sample is also labelled 0.3%; with n=0.003 instead, C_us = {:.6}",
            alt.coefficient
        );
    }
    ctx.write_text("fit_inverse_n.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn fmt_interval(t: &TimeInterval) -> String {
    let central = match t.central {
        CoherenceTime::Finite(v) => format!("{v:.3}"),
        CoherenceTime::Unbounded => "inf".into(),
    };
    let hi = t.hi.map_or("inf".to_string(), |h| format!("{h:.3}"));
    format!("{central} in [{:.3}, {hi}]", t.lo)
}

fn run_bell(a: &FitArgs, ctx: &Context) -> CliResult<()> {
    let sq1 = parse_measured("sq1", a.sq1.as_deref().unwrap_or("41.1:3.1"))?;
    let sq2 = parse_measured("sq2", a.sq2.as_deref().unwrap_or("15.8:1.4"))?;
    let psi_m = parse_measured("psi", a.psi.as_deref().unwrap_or("22.0:3.0"))?;
    let phi_m = parse_measured("phi", a.phi.as_deref().unwrap_or("13.3:1.1"))?;
    let mut report = String::new();
    let _ = writeln!(report, "sq1_us: {} +/- {}\nsq2_us: {} +/- {}", sq1.value, sq1.plus, sq2.value, sq2.plus);
    for (name, rule) in [("linear", CombinationRule::Linear), ("quadrature", CombinationRule::Quadrature)] {
        let iv = bell_t2star_intervals(sq1, sq2, rule)?;
        let _ = writeln!(report, "[{name}]");
        let _ = writeln!(
            report,
            "psi_us: {} overlaps measured {}: {}",
            fmt_interval(&iv.psi),
            psi_m.value,
            iv.psi.overlaps(&psi_m)
        );
        let _ = writeln!(
            report,
            "phi_us: {} overlaps measured {}: {}",
            fmt_interval(&iv.phi),
            phi_m.value,
            iv.phi.overlaps(&phi_m)
        );
    }
    ctx.write_text("fit_bell.txt", &report)?;
    print!("{report}");
    Ok(())
}
