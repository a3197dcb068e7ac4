//! Inhomogeneous ESR linewidth versus ¹³C concentration: the Fermi-contact
//! model for dense baths, the dipolar second-moment model for dilute ones,
//! and the W ↔ T₂* conversion.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::lattice::LatticeSite;
use crate::numeric::{pairwise_sum, Num};
use crate::{Error, Result};

/// Lattice coefficient of the closed-form dipolar linewidth, per cm⁶.
pub const DIPOLAR_LATTICE_COEFFICIENT_CM6: f64 = 3.195e46;

/// Concentration separating the dipolar (below) and contact (above) regimes.
pub const DEFAULT_REGIME_SWITCH: f64 = 0.011;

/// Minimum site count for the second-moment lattice sum.
pub const MIN_SECOND_MOMENT_SITES: usize = 3000;

const CM6_TO_M6: f64 = 1e12;

fn check_fraction(n: f64) -> Result<()> {
    if (0.0..=1.0).contains(&n) {
        Ok(())
    } else {
        Err(Error::validation(format!("concentration {n} outside [0, 1]")))
    }
}

/// Isotropic contact couplings a_l (MHz) with their site multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSiteSet {
    pub entries: Vec<(f64, u32)>,
}

impl Default for ContactSiteSet {
    /// The nine third-shell sites at 14 MHz.
    fn default() -> Self {
        Self { entries: vec![(14.0, 9)] }
    }
}

impl ContactSiteSet {
    pub fn validate(&self) -> Result<()> {
        for &(a, m) in &self.entries {
            if !(a > 0.0 && a.is_finite()) || m == 0 {
                return Err(Error::validation(format!("invalid contact site entry ({a} MHz, x{m})")));
            }
        }
        Ok(())
    }

    /// Σ_l multiplicity·(a_l/2)², MHz².
    pub fn second_moment_per_concentration(&self) -> f64 {
        self.entries.iter().map(|&(a, m)| f64::from(m) * (a / 2.0).powi(2)).sum()
    }
}

/// W = 2√(2 ln 2)·[n·Σ_l (a_l/2)²]^½, MHz.
pub fn contact_linewidth(n: f64, sites: &ContactSiteSet) -> Result<f64> {
    check_fraction(n)?;
    sites.validate()?;
    Ok(2.0 * (2.0 * LN_2).sqrt() * (n * sites.second_moment_per_concentration()).sqrt())
}

/// W = √[(μ₀μ_eμ_n g_e g_n/4πh)²·C·n] in Hz for a lattice coefficient
/// `coefficient_cm6` (cm⁻⁶, converted to m⁻⁶ against the SI prefactor).
pub fn dipolar_linewidth(n: f64, coefficient_cm6: f64, constants: &PhysicalConstants) -> Result<f64> {
    check_fraction(n)?;
    if !(coefficient_cm6 >= 0.0 && coefficient_cm6.is_finite()) {
        return Err(Error::validation("lattice coefficient must be non-negative"));
    }
    let k = constants.electron_nuclear_dipolar_hz_m3();
    Ok(k * (coefficient_cm6 * CM6_TO_M6 * n).sqrt())
}

/// Closed-form dipolar linewidth with the published lattice coefficient, Hz.
pub fn dipolar_linewidth_closed_form(n: f64) -> Result<f64> {
    dipolar_linewidth(n, DIPOLAR_LATTICE_COEFFICIENT_CM6, &PhysicalConstants::default())
}

/// Result of the second-moment lattice sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentCoefficient {
    /// Coefficient multiplying n under the square root of the linewidth,
    /// cm⁻⁶.
    pub coefficient_cm6: f64,
    /// Raw geometric sum Σ (1 − 3cos²θ)²/r⁶, cm⁻⁶.
    pub geometric_sum_cm6: f64,
    /// Convention factor applied to the geometric sum.
    pub prefactor: f64,
    pub sites_used: usize,
    pub excluded_shells: Vec<u32>,
    pub convention: String,
}

/// Spin factor ⅓·I(I+1) for I = ½ times 8 ln 2 (Gaussian FWHM² per second
/// moment).
pub fn second_moment_prefactor() -> f64 {
    8.0 * LN_2 * (0.75 / 3.0)
}

/// Van Vleck secular second-moment sum over classified sites, with θ
/// measured from the NV axis. The returned coefficient is
/// 8 ln 2 · ⅓I(I+1) · Σ_k (1 − 3cos²θ_k)²/r_k⁶, so the FWHM is
/// √(8 ln 2 · M₂) = K·√(coefficient·n) with K = μ₀g_eμ_Bg_nμ_N/4πh.
pub fn dipolar_second_moment_sum(sites: &[LatticeSite], exclude_shells: &[u32]) -> Result<SecondMomentCoefficient> {
    if sites.len() < MIN_SECOND_MOMENT_SITES {
        return Err(Error::InsufficientSites { got: sites.len(), required: MIN_SECOND_MOMENT_SITES });
    }
    if exclude_shells.iter().any(|&s| s != 0) && sites.iter().all(|s| s.shell == 0) {
        return Err(Error::validation("sites carry no shell indices; classify them first"));
    }
    let terms: Vec<f64> = sites
        .par_iter()
        .filter(|s| !exclude_shells.contains(&s.shell))
        .map(|s| {
            let c = s.cos_theta();
            let r_cm = s.distance() * 1e-8;
            (1.0 - 3.0 * c * c).powi(2) / r_cm.powi(6)
        })
        .collect();
    let geometric = pairwise_sum(&terms);
    let prefactor = second_moment_prefactor();
    Ok(SecondMomentCoefficient {
        coefficient_cm6: prefactor * geometric,
        geometric_sum_cm6: geometric,
        prefactor,
        sites_used: terms.len(),
        excluded_shells: exclude_shells.to_vec(),
        convention: "coefficient = 8 ln2 * (1/3) I(I+1) * sum (1-3cos^2 theta)^2 / r^6 [cm^-6], I=1/2, \
                     theta from [111]; W = (mu0 g_e muB g_n muN / 4 pi h) * sqrt(coefficient * 1e12 * n) [Hz]"
            .to_string(),
    })
}

/// T₂* from a FWHM linewidth: W = 2√(ln 2)/(π T₂*). Hz → s.
pub fn linewidth_to_t2star(w_hz: f64) -> Result<f64> {
    if !(w_hz > 0.0 && w_hz.is_finite()) {
        return Err(Error::validation("linewidth must be positive"));
    }
    Ok(2.0 * LN_2.sqrt() / (PI * w_hz))
}

/// Inverse of [`linewidth_to_t2star`]: s → Hz.
pub fn t2star_to_linewidth(t2star_s: f64) -> Result<f64> {
    if !(t2star_s > 0.0 && t2star_s.is_finite()) {
        return Err(Error::validation("T2* must be positive"));
    }
    Ok(2.0 * LN_2.sqrt() / (PI * t2star_s))
}

/// How the reported total linewidth is chosen from the two models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeRule {
    /// Dipolar at or below the switch concentration, contact above it.
    Threshold(f64),
    /// Larger of the two.
    Max,
}

impl Default for RegimeRule {
    fn default() -> Self {
        RegimeRule::Threshold(DEFAULT_REGIME_SWITCH)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthPoint {
    pub n: f64,
    pub w_contact_mhz: f64,
    pub w_dipolar_mhz: f64,
    pub w_total_mhz: f64,
    pub t2star_us: f64,
}

/// Both models on a concentration grid, total chosen by `rule`.
pub fn linewidth_curve(
    grid: &[f64],
    sites: &ContactSiteSet,
    dipolar_coefficient_cm6: f64,
    rule: RegimeRule,
) -> Result<Vec<LinewidthPoint>> {
    let constants = PhysicalConstants::default();
    grid.iter()
        .map(|&n| {
            if !(n > 0.0 && n <= 1.0) {
                return Err(Error::validation(format!("grid value {n} outside (0, 1]")));
            }
            let w_contact_mhz = contact_linewidth(n, sites)?;
            let w_dipolar_mhz = dipolar_linewidth(n, dipolar_coefficient_cm6, &constants)? * 1e-6;
            let w_total_mhz = match rule {
                RegimeRule::Threshold(switch) if n <= switch => w_dipolar_mhz,
                RegimeRule::Threshold(_) => w_contact_mhz,
                RegimeRule::Max => w_contact_mhz.max(w_dipolar_mhz),
            };
            let t2star_us = linewidth_to_t2star(w_total_mhz * 1e6)? * 1e6;
            Ok(LinewidthPoint { n, w_contact_mhz, w_dipolar_mhz, w_total_mhz, t2star_us })
        })
        .collect()
}

/// `count` log-spaced concentrations from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

pub fn write_curve_csv<W: Write>(points: &[LinewidthPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,w_contact_mhz,w_dipolar_mhz,w_total_mhz,t2star_us")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            Num(p.n),
            Num(p.w_contact_mhz),
            Num(p.w_dipolar_mhz),
            Num(p.w_total_mhz),
            Num(p.t2star_us)
        )?;
    }
    Ok(())
}
