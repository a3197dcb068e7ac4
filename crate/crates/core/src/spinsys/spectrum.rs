//! Stick ESR transitions and Gaussian-broadened spectra.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operators::{electron_full, spin_one, CMatrix};
use super::{EigenSystem, SpinSystemSpec};
use crate::numeric::{dot3, norm3, normalize3, scale3, sub3, Num};
use crate::{Error, Result};

/// Default relative-intensity floor below which lines are dropped.
pub const DEFAULT_INTENSITY_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    pub frequency_mhz: f64,
    pub intensity: f64,
    /// Lower eigenstate index.
    pub lower: usize,
    /// Upper eigenstate index.
    pub upper: usize,
}

/// Frequency window and intensity floor for line extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSelection {
    pub lo_mhz: f64,
    pub hi_mhz: f64,
    pub floor: f64,
}

impl LineSelection {
    pub fn window(lo_mhz: f64, hi_mhz: f64) -> Self {
        Self { lo_mhz, hi_mhz, floor: DEFAULT_INTENSITY_FLOOR }
    }

    pub fn everything() -> Self {
        Self { lo_mhz: 0.0, hi_mhz: f64::INFINITY, floor: 0.0 }
    }

    pub fn with_floor(self, floor: f64) -> Self {
        Self { floor, ..self }
    }

    fn contains(&self, f: f64) -> bool {
        f >= self.lo_mhz && f <= self.hi_mhz
    }
}

/// Unit vector transverse to the static field, in the NV frame. With no
/// field the NV-frame x axis is used.
pub fn transverse_direction(spec: &SpinSystemSpec) -> [f64; 3] {
    let b = spec.field_local();
    let x = [1.0, 0.0, 0.0];
    if norm3(b) == 0.0 {
        return x;
    }
    let bh = normalize3(b);
    let t = sub3(x, scale3(bh, dot3(x, bh)));
    if norm3(t) < 1e-6 {
        let y = [0.0, 1.0, 0.0];
        normalize3(sub3(y, scale3(bh, dot3(y, bh))))
    } else {
        normalize3(t)
    }
}

/// Magnetic-dipole ESR lines: every pair i < j with λⱼ − λᵢ inside the
/// window, weighted by |⟨j|S_x'|i⟩|² where S_x' is the electron spin
/// component transverse to the field.
///
/// Intensities are normalised to sum to one over the window, lines below the
/// floor are dropped, and the survivors are renormalised.
pub fn esr_transitions(eig: &EigenSystem, spec: &SpinSystemSpec, sel: LineSelection) -> Vec<TransitionLine> {
    let n = spec.nuclei.len();
    if eig.dimension() != spec.dimension() {
        return Vec::new();
    }
    let t = transverse_direction(spec);
    let s = spin_one();
    let mut st = CMatrix::zeros(3, 3);
    for a in 0..3 {
        st += &s[a] * Complex64::from(t[a]);
    }
    let m = eig.transform(&electron_full(&st, n));

    let mut lines = Vec::new();
    for i in 0..eig.dimension() {
        for j in (i + 1)..eig.dimension() {
            let f = eig.values[j] - eig.values[i];
            if sel.contains(f) {
                lines.push(TransitionLine { frequency_mhz: f, intensity: m[(j, i)].norm_sqr(), lower: i, upper: j });
            }
        }
    }
    let total: f64 = lines.iter().map(|l| l.intensity).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    for l in &mut lines {
        l.intensity /= total;
    }
    lines.retain(|l| l.intensity >= sel.floor);
    let kept: f64 = lines.iter().map(|l| l.intensity).sum();
    for l in &mut lines {
        l.intensity /= kept;
    }
    lines.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz));
    lines
}

/// Uniform frequency grid `start, start + step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
}

impl FrequencyGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_mhz > 0.0 && self.step_mhz.is_finite()) {
            return Err(Error::validation("grid step must be positive"));
        }
        if !(self.stop_mhz >= self.start_mhz) {
            return Err(Error::validation("grid stop must not precede start"));
        }
        let count = ((self.stop_mhz - self.start_mhz) / self.step_mhz + 1e-9).floor() as usize + 1;
        if count > 50_000_000 {
            return Err(Error::validation("grid too fine"));
        }
        Ok((0..count).map(|k| self.start_mhz + k as f64 * self.step_mhz).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies_mhz: Vec<f64>,
    pub intensities: Vec<f64>,
    pub fwhm_mhz: f64,
}

impl Spectrum {
    /// Indices of strict local maxima above `min_fraction` of the global peak.
    pub fn peaks(&self, min_fraction: f64) -> Vec<usize> {
        let top = self.intensities.iter().cloned().fold(0.0, f64::max);
        let y = &self.intensities;
        (1..y.len().saturating_sub(1))
            .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] >= min_fraction * top)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frequency_mhz,intensity")?;
        for (f, y) in self.frequencies_mhz.iter().zip(&self.intensities) {
            writeln!(out, "{},{}", Num(*f), Num(*y))?;
        }
        Ok(())
    }
}

pub fn write_lines_csv<W: Write>(lines: &[TransitionLine], mut out: W) -> std::io::Result<()> {
    writeln!(out, "freq_mhz,intensity,i,j")?;
    for l in lines {
        writeln!(out, "{},{},{},{}", Num(l.frequency_mhz), Num(l.intensity), l.lower, l.upper)?;
    }
    Ok(())
}

/// Sum of unit-area Gaussians of width `fwhm_mhz`, one per line, weighted
/// by line intensity.
pub fn synth_spectrum(lines: &[TransitionLine], fwhm_mhz: f64, grid: FrequencyGrid) -> Result<Spectrum> {
    if !(fwhm_mhz > 0.0 && fwhm_mhz.is_finite()) {
        return Err(Error::validation("FWHM must be positive"));
    }
    let freqs = grid.points()?;
    let sigma = fwhm_mhz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let intensities = freqs
        .iter()
        .map(|&f| {
            lines
                .iter()
                .map(|l| {
                    let z = (f - l.frequency_mhz) / sigma;
                    l.intensity * norm * (-0.5 * z * z).exp()
                })
                .sum()
        })
        .collect();
    Ok(Spectrum { frequencies_mhz: freqs, intensities, fwhm_mhz })
}

/// Separation of the two strongest lines in `lines` (e.g. one ESR branch).
pub fn strongest_pair_splitting(lines: &[TransitionLine]) -> Option<f64> {
    let mut sorted: Vec<&TransitionLine> = lines.iter().collect();
    sorted.sort_by(|a, b| b.intensity.total_cmp(&a.intensity));
    match sorted.as_slice() {
        [a, b, ..] => Some((a.frequency_mhz - b.frequency_mhz).abs()),
        _ => None,
    }
}

/// Energy levels of one electron manifold, grouped into first-order
/// hyperfine multiplets: consecutive levels closer than `gap_mhz` share a
/// group.
pub fn hyperfine_groups(levels: &[f64], gap_mhz: f64) -> Vec<Vec<f64>> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for e in sorted {
        match groups.last_mut() {
            Some(g) if e - g[g.len() - 1] < gap_mhz => g.push(e),
            _ => groups.push(vec![e]),
        }
    }
    groups
}

/// Second-order splitting of the central hyperfine multiplet(s) of the
/// m_s = −1 manifold: levels that are degenerate to first order in the
/// hyperfine coupling (equal Σm_I) but split at second order. Returns the
/// widest spread among the central groups, or `None` without ≥ 2 nuclei.
pub fn central_group_splitting(eig: &EigenSystem, spec: &SpinSystemSpec, gap_mhz: f64) -> Option<f64> {
    let n = spec.nuclei.len();
    if n < 2 {
        return None;
    }
    let ms = super::electron_projection(eig, n);
    let levels: Vec<f64> =
        eig.values.iter().zip(&ms).filter(|(_, m)| (**m + 1.0).abs() < 0.25).map(|(e, _)| *e).collect();
    let groups = hyperfine_groups(&levels, gap_mhz);
    if groups.len() < 3 {
        return None;
    }
    let inner = &groups[1..groups.len() - 1];
    inner.iter().map(|g| g[g.len() - 1] - g[0]).reduce(f64::max)
}
