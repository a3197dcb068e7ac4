use clap::Args;
use serde::{Deserialize, Serialize};
use spinbath_core::spinsys::solve;
use spinbath_core::spinsys::spectrum::{
    central_group_splitting, esr_transitions, synth_spectrum, write_lines_csv, FrequencyGrid, LineSelection,
    DEFAULT_INTENSITY_FLOOR,
};

use super::{prepare, Globals};
use crate::error::CliResult;
use crate::svg::{Plot, Series, Style};
use crate::system::build_spec;

/// Levels closer than this share a first-order hyperfine multiplet.
const MULTIPLET_GAP_MHZ: f64 = 40.0;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumArgs {
    /// Nuclei: fs0..fs2, third, iso:<MHz>, axial:<par>:<perp>:<polar>[:<az>], or none [default: fs0]
    #[arg(long)]
    pub nuclei: Option<String>,
    /// Field along the NV axis, G [default: 83]
    #[arg(long)]
    pub field_gauss: Option<f64>,
    /// Zero-field splitting D, MHz [default: 2870]
    #[arg(long)]
    pub d_mhz: Option<f64>,
    /// Gaussian FWHM of each line, MHz [default: 1]
    #[arg(long)]
    pub fwhm_mhz: Option<f64>,
    /// Window start, MHz [default: D/2]
    #[arg(long)]
    pub lo_mhz: Option<f64>,
    /// Window end, MHz [default: 3D/2]
    #[arg(long)]
    pub hi_mhz: Option<f64>,
    /// Grid step, MHz [default: 0.5]
    #[arg(long)]
    pub step_mhz: Option<f64>,
    /// Relative intensity floor for listed lines [default: 1e-4]
    #[arg(long)]
    pub floor: Option<f64>,
}

pub fn run(flags: &SpectrumArgs, g: &Globals) -> CliResult<()> {
    let (a, ctx) = prepare("spectrum", flags, g)?;
    let nuclei = a.nuclei.as_deref().unwrap_or("fs0");
    let spec = build_spec(nuclei, a.field_gauss, a.d_mhz)?;
    let d = spec.zfs.d_mhz;
    let lo = a.lo_mhz.unwrap_or(0.5 * d);
    let hi = a.hi_mhz.unwrap_or(1.5 * d);
    let grid = FrequencyGrid { start_mhz: lo, stop_mhz: hi, step_mhz: a.step_mhz.unwrap_or(0.5) };
    grid.points()?;

    let eig = solve(&spec)?;
    let sel = LineSelection::window(lo, hi).with_floor(a.floor.unwrap_or(DEFAULT_INTENSITY_FLOOR));
    let lines = esr_transitions(&eig, &spec, sel);
    let spectrum = synth_spectrum(&lines, a.fwhm_mhz.unwrap_or(1.0), grid)?;

    let mut notes = vec![format!("nuclei: {nuclei}"), format!("field_gauss: {}", spec.field.gauss)];
    let central = central_group_splitting(&eig, &spec, MULTIPLET_GAP_MHZ);
    if let Some(s) = central {
        notes.push(format!("central_group_splitting_mhz: {s}"));
    }
    ctx.write_csv("spectrum_lines.csv", &notes, |buf| write_lines_csv(&lines, buf))?;
    ctx.write_csv("spectrum.csv", &notes, |buf| spectrum.write_csv(buf))?;

    let plot = Plot {
        title: format!("ESR spectrum ({nuclei})"),
        x_label: "frequency (MHz)".into(),
        y_label: "intensity".into(),
        series: vec![Series {
            name: "spectrum".into(),
            points: spectrum.frequencies_mhz.iter().copied().zip(spectrum.intensities.iter().copied()).collect(),
            style: Style::Line,
        }],
        ..Default::default()
    };
    ctx.write_svg("spectrum.svg", &plot.render())?;

    println!("{} lines in [{lo}, {hi}] MHz", lines.len());
    if let Some(s) = central {
        println!("central multiplet splitting: {s:.4} MHz");
    }
    ctx.print_written();
    Ok(())
}
