//! Physical constants (SI, CODATA 2018) and the derived coupling scales
//! used throughout the crate.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fundamental constants plus the electron and ¹³C g-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Vacuum permeability, T·m/A.
    pub mu0: f64,
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    /// Nuclear magneton, J/T.
    pub mu_n: f64,
    /// Planck constant, J·s.
    pub h: f64,
    pub g_e: f64,
    /// ¹³C nuclear g-factor.
    pub g_n: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu0: 1.256_637_062_12e-6,
            mu_b: 9.274_010_078_3e-24,
            mu_n: 5.050_783_746_1e-27,
            h: 6.626_070_15e-34,
            g_e: 2.0028,
            g_n: 1.40483,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu0, self.mu_b, self.mu_n, self.h, self.g_e, self.g_n];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::validation("physical constants must be finite and positive"))
        }
    }

    /// Electron Zeeman frequency per unit field, g_e·μ_B/h in MHz/G.
    pub fn electron_mhz_per_gauss(&self) -> f64 {
        self.g_e * self.mu_b / self.h * 1e-4 * 1e-6
    }

    /// ¹³C Zeeman frequency per unit field, g_n·μ_N/h in MHz/G.
    pub fn nuclear_mhz_per_gauss(&self) -> f64 {
        self.g_n * self.mu_n / self.h * 1e-4 * 1e-6
    }

    /// (μ₀/4π)·g_eμ_B·g_nμ_N/h in Hz·m³: the electron–¹³C point-dipole
    /// coupling at unit distance.
    pub fn electron_nuclear_dipolar_hz_m3(&self) -> f64 {
        self.mu0 / (4.0 * std::f64::consts::PI) * self.g_e * self.mu_b * self.g_n * self.mu_n / self.h
    }

    /// (μ₀/4π)·(g_nμ_N)²/h in Hz·m³: ¹³C–¹³C dipolar coupling at unit distance.
    pub fn nuclear_nuclear_dipolar_hz_m3(&self) -> f64 {
        let gm = self.g_n * self.mu_n;
        self.mu0 / (4.0 * std::f64::consts::PI) * gm * gm / self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_values_are_defaults() {
        let c = PhysicalConstants::default();
        assert_eq!(c.g_e, 2.0028);
        assert_eq!(c.g_n, 1.40483);
        c.validate().unwrap();
    }

    #[test]
    fn zeeman_scales() {
        let c = PhysicalConstants::default();
        // μ_B/h = 13.996 GHz/T
        assert!((c.electron_mhz_per_gauss() / c.g_e - 1.399_624_5).abs() < 1e-6);
        // ¹³C gyromagnetic ratio 10.705 MHz/T
        assert!((c.nuclear_mhz_per_gauss() * 1e4 - 10.7084).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_positive() {
        let c = PhysicalConstants { h: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
