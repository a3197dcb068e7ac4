//! Ensemble FID of a two-nucleus register dephased by static bath fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DecayCurve;
use crate::constants::PhysicalConstants;
use crate::lattice::{shells_within, site_uniform, LatticeSite};
use crate::numeric::{norm3, pairwise_sum, sub3};
use crate::{Error, Result};

pub const MIN_BATH_SAMPLES: usize = 100;

/// Default radius around each register nucleus inside which bath spins
/// couple to it, Å.
pub const DEFAULT_NEAR_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceKind {
    Sq1,
    Sq2,
    Phi,
    Psi,
}

impl CoherenceKind {
    pub const ALL: [CoherenceKind; 4] =
        [CoherenceKind::Sq1, CoherenceKind::Sq2, CoherenceKind::Phi, CoherenceKind::Psi];

    /// (w₁, w₂): the accumulated phase is (w₁Δω₁ + w₂Δω₂)·t.
    pub fn weights(self) -> (f64, f64) {
        match self {
            CoherenceKind::Sq1 => (1.0, 0.0),
            CoherenceKind::Sq2 => (0.0, 1.0),
            CoherenceKind::Phi => (1.0, 1.0),
            CoherenceKind::Psi => (1.0, -1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoherenceKind::Sq1 => "sq1",
            CoherenceKind::Sq2 => "sq2",
            CoherenceKind::Phi => "phi",
            CoherenceKind::Psi => "psi",
        }
    }
}

impl std::str::FromStr for CoherenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoherenceKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::validation(format!("unknown coherence kind {s:?}")))
    }
}

/// Per-realization static frequency offsets (Δω₁, Δω₂) of the two register
/// nuclei, rad/μs. `sample(k)` must depend only on `k` and the source.
pub trait PairCouplingSource: Sync {
    fn sample(&self, index: u64) -> (f64, f64);
}

/// Correlated Gaussian offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCouplings {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Correlation coefficient in [−1, 1].
    pub rho: f64,
    pub seed: u64,
}

impl GaussianCouplings {
    pub fn new(sigma1: f64, sigma2: f64, rho: f64, seed: u64) -> Result<Self> {
        if !(sigma1 >= 0.0 && sigma2 >= 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::validation("coupling widths must be non-negative"));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::validation("correlation must lie in [-1, 1]"));
        }
        Ok(Self { sigma1, sigma2, rho, seed })
    }
}

impl PairCouplingSource for GaussianCouplings {
    fn sample(&self, index: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z2c = self.rho * z1 + (1.0 - self.rho * self.rho).max(0.0).sqrt() * z2;
        (self.sigma1 * z1, self.sigma2 * z2c)
    }
}

/// A fixed list, cycled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitCouplings {
    pub pairs: Vec<(f64, f64)>,
}

impl PairCouplingSource for ExplicitCouplings {
    fn sample(&self, index: u64) -> (f64, f64) {
        if self.pairs.is_empty() {
            return (0.0, 0.0);
        }
        self.pairs[(index % self.pairs.len() as u64) as usize]
    }
}

/// Offsets from secular ¹³C–¹³C dipolar fields of a random bath: each
/// realization occupies lattice sites with probability n and gives every
/// bath spin a random m = ±½; Δωⱼ = Σ_k J_jk·m_k over bath spins within the
/// near radius of register nucleus j, J_jk = 2π·K(1 − 3cos²θ)/r³ with θ from
/// the NV axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathPairCouplings {
    pub concentration: f64,
    pub seed: u64,
    pub near_radius: f64,
    pub register: [[f64; 3]; 2],
    /// Candidate bath sites.
    pub sites: Vec<LatticeSite>,
    /// Ising couplings of each candidate site to the two register nuclei,
    /// rad/μs per unit m.
    couplings: Vec<[f64; 2]>,
}

impl BathPairCouplings {
    /// Register on two first-shell sites, bath on everything else.
    pub fn first_shell_pair(concentration: f64, seed: u64, near_radius: f64) -> Result<Self> {
        Self::with_constants(concentration, seed, near_radius, &PhysicalConstants::default())
    }

    pub fn with_constants(
        concentration: f64,
        seed: u64,
        near_radius: f64,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&concentration) {
            return Err(Error::validation(format!("concentration {concentration} outside [0, 1]")));
        }
        if !(near_radius > 0.0 && near_radius.is_finite()) {
            return Err(Error::validation("near radius must be positive"));
        }
        let first = shells_within(2.0)?;
        let mut shell1 = first.shell(1);
        let (a, b) = match (shell1.next(), shell1.next()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::validation("first shell not found")),
        };
        let reach = near_radius + a.distance().max(b.distance());
        let lattice = shells_within(reach)?;
        let register = [a.position, b.position];
        let k_nn = constants.nuclear_nuclear_dipolar_hz_m3();
        let axis = crate::spinsys::nv_axis();
        let coupling = |site: &LatticeSite, nucleus: [f64; 3]| -> f64 {
            let d = sub3(site.position, nucleus);
            let r = norm3(d);
            if r > near_radius {
                return 0.0;
            }
            let c = crate::numeric::dot3(d, axis) / r;
            let r_m = r * 1e-10;
            2.0 * std::f64::consts::PI * k_nn * (1.0 - 3.0 * c * c) / (r_m * r_m * r_m) * 1e-6
        };
        let mut sites = Vec::new();
        let mut couplings = Vec::new();
        for s in lattice.sites {
            if s.grid == a.grid || s.grid == b.grid {
                continue;
            }
            let j = [coupling(&s, register[0]), coupling(&s, register[1])];
            if j != [0.0, 0.0] {
                couplings.push(j);
                sites.push(s);
            }
        }
        Ok(Self { concentration, seed, near_radius, register, sites, couplings })
    }

    /// Seed of realization `index`; `lattice::sample_bath(&self.sites, n,
    /// seed)` reproduces its occupation.
    pub fn realization_seed(&self, index: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng.random()
    }
}

impl PairCouplingSource for BathPairCouplings {
    fn sample(&self, index: u64) -> (f64, f64) {
        let seed = self.realization_seed(index);
        let mut spins = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let (mut d1, mut d2) = (Vec::new(), Vec::new());
        for (i, j) in self.couplings.iter().enumerate() {
            if site_uniform(seed, i) < self.concentration {
                let m = if spins.random::<bool>() { 0.5 } else { -0.5 };
                d1.push(j[0] * m);
                d2.push(j[1] * m);
            }
        }
        (pairwise_sum(&d1), pairwise_sum(&d2))
    }
}

/// Ensemble-averaged real envelope ⟨cos((w₁Δω₁ + w₂Δω₂)t)⟩ over `samples`
/// realizations, on `times_us`.
pub fn bath_fid_simulate(
    source: &dyn PairCouplingSource,
    kind: CoherenceKind,
    times_us: &[f64],
    samples: usize,
) -> Result<DecayCurve> {
    if samples < MIN_BATH_SAMPLES {
        return Err(Error::validation(format!("need at least {MIN_BATH_SAMPLES} samples, got {samples}")));
    }
    let (w1, w2) = kind.weights();
    let omegas: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let (a, b) = source.sample(k);
            w1 * a + w2 * b
        })
        .collect();
    let signal: Vec<f64> = times_us
        .par_iter()
        .map(|&t| {
            let c: Vec<f64> = omegas.iter().map(|w| (w * t).cos()).collect();
            pairwise_sum(&c) / samples as f64
        })
        .collect();
    DecayCurve::new(times_us.to_vec(), signal, None)
}

/// Time span over which the SQ1 envelope of `source` falls below 0.1.
/// Starts from 4/rms(Δω₁) and doubles, at most 12 times.
pub fn fid_span(source: &dyn PairCouplingSource, samples: usize) -> Result<f64> {
    let probe = samples.min(200) as u64;
    let ms: f64 = (0..probe).map(|k| source.sample(k).0.powi(2)).sum::<f64>() / probe.max(1) as f64;
    if ms <= 0.0 {
        return Err(Error::validation("bath offsets are all zero; no decay to span"));
    }
    let mut t = 4.0 / ms.sqrt();
    for _ in 0..12 {
        let c = bath_fid_simulate(source, CoherenceKind::Sq1, &[t], samples)?;
        if c.signal[0] < 0.1 {
            break;
        }
        t *= 2.0;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, stop: f64) -> Vec<f64> {
        (0..n).map(|k| stop * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_couplings_give_unit_signal() {
        let src = ExplicitCouplings { pairs: vec![(0.0, 0.0)] };
        let c = bath_fid_simulate(&src, CoherenceKind::Phi, &times(10, 5.0), 100).unwrap();
        assert!(c.signal.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn psi_is_decoherence_free_for_common_mode() {
        let src = GaussianCouplings::new(0.3, 0.3, 1.0, 7).unwrap();
        let c = bath_fid_simulate(&src, CoherenceKind::Psi, &times(30, 50.0), 500).unwrap();
        assert!(c.signal.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let phi = bath_fid_simulate(&src, CoherenceKind::Phi, &times(30, 50.0), 500).unwrap();
        assert!(phi.signal[29] < 0.1);
    }

    #[test]
    fn deterministic_and_normalized() {
        let src = BathPairCouplings::first_shell_pair(0.011, 3, DEFAULT_NEAR_RADIUS).unwrap();
        let t = times(20, 1e4);
        let a = bath_fid_simulate(&src, CoherenceKind::Sq1, &t, 200).unwrap();
        let b = bath_fid_simulate(&src, CoherenceKind::Sq1, &t, 200).unwrap();
        assert_eq!(a, b);
        assert!((a.signal[0] - 1.0).abs() < 1e-12);
        assert!(bath_fid_simulate(&src, CoherenceKind::Sq1, &t, 99).is_err());
    }

    #[test]
    fn realization_matches_bath_sample() {
        let src = BathPairCouplings::first_shell_pair(0.05, 11, 6.0).unwrap();
        let seed = src.realization_seed(4);
        let bath = crate::lattice::sample_bath(&src.sites, 0.05, seed).unwrap();
        let (d1, _) = src.sample(4);
        assert_eq!(bath.is_empty(), d1 == 0.0);
    }
}
