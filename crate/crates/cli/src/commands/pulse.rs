use std::io::Write as _;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinbath_core::numeric::Num;
use spinbath_core::pulses::{
    bell_fidelity_under_detuning, bell_prepare_and_fidelity, endor_sequence, parse_sequence, rabi_frequency,
    rabi_simulate, run_sequence, swap_transfer_efficiency, BellVariant, Channel, Drive, FreeEvolution, InitialState,
    Label, Register, DEFAULT_KAPPA,
};

use super::{in_file, linear_grid, parse_list, prepare, read_input, Globals};
use crate::error::{CliError, CliResult};
use crate::output::Context;
use crate::svg::{Plot, Series, Style};
use crate::system::build_spec;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseArgs {
    /// run (sequence file), rabi, bell or endor [default: run]
    #[arg(long)]
    pub mode: Option<String>,
    /// Register nuclei, as for `spectrum` [default: fs0,third]
    #[arg(long)]
    pub nuclei: Option<String>,
    /// Field along the NV axis, G [default: 83]
    #[arg(long)]
    pub field_gauss: Option<f64>,
    /// Zero-field splitting D, MHz [default: 2870]
    #[arg(long)]
    pub d_mhz: Option<f64>,
    /// run: pulse sequence file
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// run: values substituted for `wait tau`, comma-separated, us
    #[arg(long)]
    pub tau: Option<String>,
    /// run: mixed, ideal or an ms:bits label [default: mixed]
    #[arg(long)]
    pub init: Option<String>,
    /// Uniform nuclear detuning during waits, rad/us [default: 0]
    #[arg(long)]
    pub detuning: Option<f64>,
    /// rabi: mw or rf [default: rf]
    #[arg(long)]
    pub channel: Option<String>,
    /// rabi: transition as two levels, e.g. -1:00,-1:10 [default: first nucleus in m_s=-1]
    #[arg(long)]
    pub target: Option<String>,
    /// rabi: drive power, arbitrary units [default: 1]
    #[arg(long)]
    pub power: Option<f64>,
    /// rabi: drive constant kappa [default: 1e-3]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// bell: phi+, phi-, psi+, psi- or all [default: all]
    #[arg(long)]
    pub variant: Option<String>,
    /// rabi/bell: time span, us [default: rabi 4 periods, bell 10]
    #[arg(long)]
    pub t_max_us: Option<f64>,
    /// rabi/bell: number of time points [default: 101]
    #[arg(long)]
    pub points: Option<usize>,
}

fn parse_level(reg: &Register, s: &str) -> CliResult<usize> {
    spinbath_core::pulses::parse_level(reg, s).map_err(|e| CliError::Config(format!("level {s:?}: {e}")))
}

pub fn run(flags: &PulseArgs, g: &Globals) -> CliResult<()> {
    let (a, ctx) = prepare("pulse", flags, g)?;
    let mode = a.mode.clone().unwrap_or_else(|| "run".into());
    let text = match (mode.as_str(), &a.sequence) {
        ("run", Some(p)) => Some((p.clone(), read_input(p)?)),
        ("run", None) => return Err(CliError::Config("--sequence is required for mode run".into())),
        _ => None,
    };
    let reg = Register::new(build_spec(a.nuclei.as_deref().unwrap_or("fs0,third"), a.field_gauss, a.d_mhz)?)?;
    let evolution = FreeEvolution::uniform(reg.n_nuclei(), a.detuning.unwrap_or(0.0));
    match mode.as_str() {
        "run" => {
            let (path, text) = text.expect("checked above");
            run_file(&a, &ctx, &reg, &evolution, &path, &text)
        }
        "rabi" => run_rabi(&a, &ctx, &reg),
        "bell" => run_bell(&a, &ctx, &reg, &evolution),
        "endor" => run_endor(&ctx, &reg),
        m => Err(CliError::Config(format!("unknown mode {m:?} (run, rabi, bell, endor)"))),
    }?;
    ctx.print_written();
    Ok(())
}

fn run_file(
    a: &PulseArgs,
    ctx: &Context,
    reg: &Register,
    evolution: &FreeEvolution,
    path: &std::path::Path,
    text: &str,
) -> CliResult<()> {
    let taus: Vec<Option<f64>> = match &a.tau {
        Some(s) => parse_list("tau", s)?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let init = match a.init.as_deref().unwrap_or("mixed") {
        "ideal" => InitialState::ideal(),
        "mixed" => InitialState::MixedNuclear,
        s => InitialState::Pure(reg.labels[parse_level(reg, s)?]),
    };
    let wrap = in_file(path);
    // parse once up front so a bad file fails before any sweep work
    let sequences =
        taus.iter().map(|&tau| parse_sequence(text, reg, tau).map_err(&wrap)).collect::<CliResult<Vec<_>>>()?;
    let rows = sequences
        .par_iter()
        .map(|seq| run_sequence(reg, seq, init, evolution).map(|s| s.populations()))
        .collect::<spinbath_core::Result<Vec<_>>>()?;
    let names: Vec<String> = (0..reg.dimension()).map(|k| reg.label_name(k)).collect();
    ctx.write_csv("pulse_run.csv", &[format!("sequence: {}", path.display())], |buf| {
        let header: Vec<String> = names.iter().map(|n| format!("p[{n}]")).collect();
        writeln!(buf, "tau_us,{}", header.join(","))?;
        for (tau, pops) in taus.iter().zip(&rows) {
            let t = tau.map_or(String::new(), |t| Num(t).to_string());
            let cols: Vec<String> = pops.iter().map(|&p| Num(p).to_string()).collect();
            writeln!(buf, "{t},{}", cols.join(","))?;
        }
        Ok(())
    })?;
    if let Some(last) = rows.last() {
        let (k, p) = last.iter().enumerate().fold((0, f64::MIN), |m, (k, &p)| if p > m.1 { (k, p) } else { m });
        println!("most populated level: {} ({p:.6})", names[k]);
    }
    Ok(())
}

fn run_rabi(a: &PulseArgs, ctx: &Context, reg: &Register) -> CliResult<()> {
    let channel: Channel = a.channel.as_deref().unwrap_or("rf").parse()?;
    let target = match &a.target {
        Some(s) => {
            let (i, j) = s.split_once(',').ok_or_else(|| CliError::Config("--target needs two levels".into()))?;
            (parse_level(reg, i.trim())?, parse_level(reg, j.trim())?)
        }
        None if channel == Channel::Mw => (reg.index_of(Label::new(0, 0))?, reg.index_of(Label::new(-1, 0))?),
        None => {
            if reg.n_nuclei() == 0 {
                return Err(CliError::Config("RF Rabi needs at least one nucleus".into()));
            }
            let bit = 1 << (reg.n_nuclei() - 1);
            (reg.index_of(Label::new(-1, 0))?, reg.index_of(Label::new(-1, bit))?)
        }
    };
    let drive = Drive { power: a.power.unwrap_or(1.0), kappa: a.kappa.unwrap_or(DEFAULT_KAPPA) };
    let omega = rabi_frequency(reg, channel, target, &drive)?;
    let t_max = match a.t_max_us {
        Some(t) => t,
        None if omega > 0.0 => 4.0 * 2.0 * std::f64::consts::PI / omega,
        None => return Err(CliError::Config("zero Rabi frequency; pass --t-max-us".into())),
    };
    let times = linear_grid(t_max, a.points.unwrap_or(101))?;
    let curve = rabi_simulate(reg, &drive, channel, target, &times)?;
    let notes = vec![
        format!("transition: {} <-> {}", reg.label_name(target.0), reg.label_name(target.1)),
        format!("rabi_omega_rad_per_us: {omega}"),
    ];
    ctx.write_csv("pulse_rabi.csv", &notes, |buf| {
        writeln!(buf, "t_us,population")?;
        for (t, p) in curve.times_us.iter().zip(&curve.signal) {
            writeln!(buf, "{},{}", Num(*t), Num(*p))?;
        }
        Ok(())
    })?;
    let plot = Plot {
        title: "Rabi oscillation".into(),
        x_label: "t (us)".into(),
        y_label: "population".into(),
        series: vec![Series {
            name: reg.label_name(target.0),
            points: curve.times_us.iter().copied().zip(curve.signal.iter().copied()).collect(),
            style: Style::Line,
        }],
        ..Default::default()
    };
    ctx.write_svg("pulse_rabi.svg", &plot.render())?;
    println!("Rabi frequency: {omega:.6} rad/us");
    Ok(())
}

fn run_bell(a: &PulseArgs, ctx: &Context, reg: &Register, evolution: &FreeEvolution) -> CliResult<()> {
    let variants: Vec<BellVariant> = match a.variant.as_deref().unwrap_or("all") {
        "all" => BellVariant::ALL.to_vec(),
        s => vec![s.parse()?],
    };
    let times = linear_grid(a.t_max_us.unwrap_or(10.0), a.points.unwrap_or(101))?;
    let results = variants
        .par_iter()
        .map(|&v| {
            let f0 = bell_prepare_and_fidelity(reg, v)?;
            let curve = bell_fidelity_under_detuning(reg, v, evolution, &times)?;
            Ok((v, f0, curve))
        })
        .collect::<spinbath_core::Result<Vec<_>>>()?;
    ctx.write_csv("pulse_bell.csv", &[format!("nuclear_detuning_rad_per_us: {}", a.detuning.unwrap_or(0.0))], |buf| {
        writeln!(buf, "variant,t_us,fidelity")?;
        for (v, _, curve) in &results {
            for (t, f) in times.iter().zip(curve) {
                writeln!(buf, "{},{},{}", v.name(), Num(*t), Num(*f))?;
            }
        }
        Ok(())
    })?;
    for (v, f0, _) in &results {
        println!("{}: preparation fidelity {f0:.12}", v.name());
    }
    Ok(())
}

fn run_endor(ctx: &Context, reg: &Register) -> CliResult<()> {
    let mut rows = Vec::new();
    for q in 1..=reg.n_nuclei() {
        let (seq, flipped) = endor_sequence(reg, q)?;
        let s = run_sequence(reg, &seq, InitialState::ideal(), &FreeEvolution::default())?;
        let p = s.population(reg, flipped)?;
        let swap = swap_transfer_efficiency(reg, q)?;
        rows.push((q, reg.label_name(reg.index_of(flipped)?), p, swap));
    }
    if rows.is_empty() {
        return Err(CliError::Config("ENDOR needs at least one nucleus".into()));
    }
    ctx.write_csv("pulse_endor.csv", &[], |buf| {
        writeln!(buf, "qubit,flipped_level,endor_population,swap_efficiency")?;
        for (q, l, p, s) in &rows {
            writeln!(buf, "{q},{l},{},{}", Num(*p), Num(*s))?;
        }
        Ok(())
    })?;
    for (q, l, p, s) in &rows {
        println!("nucleus {q}: ENDOR population of {l} = {p:.12}, SWAP transfer = {s:.12}");
    }
    Ok(())
}
