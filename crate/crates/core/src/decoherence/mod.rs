//! Coherence-decay models and fits, Bell-state rate combination, the bath
//! FID simulator and the T₂ ∝ 1/n concentration fit.
//!
//! Times are in μs and angular frequencies in rad/μs throughout.

mod bath;
mod fit;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::numeric::Num;
use crate::{Error, Result};

pub use bath::{
    bath_fid_simulate, fid_span, BathPairCouplings, CoherenceKind, ExplicitCouplings, GaussianCouplings,
    PairCouplingSource, DEFAULT_NEAR_RADIUS, MIN_BATH_SAMPLES,
};
pub use fit::{fit_decay, DecayFit, FitOptions, InitialGuess, MAX_ITERATIONS};

/// Minimum number of samples for any fit.
pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times_us: Vec<f64>,
    pub signal: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl DecayCurve {
    pub fn new(times_us: Vec<f64>, signal: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let c = Self { times_us, signal, sigma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times_us.len() != self.signal.len() {
            return Err(Error::validation("time and signal lengths differ"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.signal.len() {
                return Err(Error::validation("sigma length differs from signal"));
            }
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::validation("sigma values must be positive"));
            }
        }
        if self.times_us.iter().chain(&self.signal).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite sample"));
        }
        if self.times_us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("times must be strictly increasing"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    /// Reads `t_us,signal[,sigma]` with a header row; `#` lines are comments.
    pub fn from_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let table = crate::csvio::Table::new(&text);
        let mut reader = table.reader();
        let header_line = table.header_line();
        let headers = reader.headers().map_err(|e| Error::Parse { line: header_line, message: e.to_string() })?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let with_sigma = match names.as_slice() {
            ["t_us", "signal"] => false,
            ["t_us", "signal", "sigma"] => true,
            _ => {
                return Err(Error::Parse {
                    line: header_line,
                    message: format!("expected header t_us,signal[,sigma], got {}", names.join(",")),
                })
            }
        };
        let (mut t, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record.map_err(|e| table.error(&e))?;
            let line = record.position().map_or(0, |p| table.line(p.record()));
            let want = if with_sigma { 3 } else { 2 };
            if record.len() != want {
                return Err(Error::Parse { line, message: format!("expected {want} fields, got {}", record.len()) });
            }
            let field = |k: usize| -> Result<f64> {
                record[k].parse::<f64>().map_err(|e| Error::Parse { line, message: format!("field {}: {e}", k + 1) })
            };
            t.push(field(0)?);
            y.push(field(1)?);
            if with_sigma {
                s.push(field(2)?);
            }
        }
        let curve = Self { times_us: t, signal: y, sigma: with_sigma.then_some(s) };
        curve.validate()?;
        Ok(curve)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match &self.sigma {
            Some(s) => {
                writeln!(out, "t_us,signal,sigma")?;
                for ((t, y), e) in self.times_us.iter().zip(&self.signal).zip(s) {
                    writeln!(out, "{},{},{}", Num(*t), Num(*y), Num(*e))?;
                }
            }
            None => {
                writeln!(out, "t_us,signal")?;
                for (t, y) in self.times_us.iter().zip(&self.signal) {
                    writeln!(out, "{},{}", Num(*t), Num(*y))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GaussianFid,
    CubicEcho,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GaussianFid => "gaussian_fid",
            ModelKind::CubicEcho => "cubic_echo",
        }
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::GaussianFid => &["t2star_us", "delta_omega_rad_per_us", "amplitude", "offset"],
            ModelKind::CubicEcho => &["t2_us", "amplitude", "offset"],
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_fid" | "fid" => Ok(ModelKind::GaussianFid),
            "cubic_echo" | "echo" => Ok(ModelKind::CubicEcho),
            _ => Err(Error::validation(format!("unknown model {s:?}"))),
        }
    }
}

/// offset + amplitude·exp[−(t/T₂*)²]·cos(Δω t)
pub fn fid_model(t: f64, t2star: f64, delta_omega: f64, amplitude: f64, offset: f64) -> f64 {
    offset + amplitude * (-(t / t2star).powi(2)).exp() * (delta_omega * t).cos()
}

/// offset + amplitude·exp[−(t/T₂)³]
pub fn echo_model(t: f64, t2: f64, amplitude: f64, offset: f64) -> f64 {
    offset + amplitude * (-(t / t2).powi(3)).exp()
}

/// A coherence time that may be infinite (zero rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoherenceTime {
    Finite(f64),
    Unbounded,
}

impl CoherenceTime {
    fn from_rate(rate: f64) -> Self {
        if rate > 0.0 {
            CoherenceTime::Finite(1.0 / rate)
        } else {
            CoherenceTime::Unbounded
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            CoherenceTime::Finite(t) => Some(t),
            CoherenceTime::Unbounded => None,
        }
    }
}

impl std::fmt::Display for CoherenceTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoherenceTime::Finite(t) => write!(f, "{t}"),
            CoherenceTime::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// How single-quantum dephasing rates combine into Bell-state rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationRule {
    /// 1/T_Φ = r₁ + r₂, 1/T_Ψ = |r₁ − r₂| (fully correlated noise).
    #[default]
    Linear,
    /// Uncorrelated Gaussian noise: both rates √(r₁² + r₂²).
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellT2 {
    pub psi: CoherenceTime,
    pub phi: f64,
}

fn combine_rates(r1: f64, r2: f64, rule: CombinationRule) -> (f64, f64) {
    match rule {
        CombinationRule::Linear => ((r1 - r2).abs(), r1 + r2),
        CombinationRule::Quadrature => {
            let q = r1.hypot(r2);
            (q, q)
        }
    }
}

pub fn bell_t2star_from_sq(t_sq1: f64, t_sq2: f64) -> Result<BellT2> {
    bell_t2star_with_rule(t_sq1, t_sq2, CombinationRule::Linear)
}

pub fn bell_t2star_with_rule(t_sq1: f64, t_sq2: f64, rule: CombinationRule) -> Result<BellT2> {
    for t in [t_sq1, t_sq2] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::validation("single-quantum T2* must be positive"));
        }
    }
    let (psi, phi) = combine_rates(1.0 / t_sq1, 1.0 / t_sq2, rule);
    Ok(BellT2 { psi: CoherenceTime::from_rate(psi), phi: 1.0 / phi })
}

/// A value with asymmetric 1σ errors, `value +plus −minus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub plus: f64,
    pub minus: f64,
}

impl Measured {
    pub fn symmetric(value: f64, sigma: f64) -> Self {
        Self { value, plus: sigma, minus: sigma }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.minus
    }

    pub fn hi(&self) -> f64 {
        self.value + self.plus
    }
}

/// Interval with a central value; `hi` is `None` when unbounded above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub central: CoherenceTime,
    pub lo: f64,
    pub hi: Option<f64>,
}

impl TimeInterval {
    /// Whether this interval and the measured 1σ band overlap.
    pub fn overlaps(&self, m: &Measured) -> bool {
        self.lo <= m.hi() && self.hi.is_none_or(|h| h >= m.lo())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellIntervals {
    pub psi: TimeInterval,
    pub phi: TimeInterval,
}

/// Propagates the SQ error bars through the combination rule by interval
/// arithmetic on the rates.
pub fn bell_t2star_intervals(sq1: Measured, sq2: Measured, rule: CombinationRule) -> Result<BellIntervals> {
    for m in [sq1, sq2] {
        if !(m.lo() > 0.0 && m.plus >= 0.0 && m.minus >= 0.0 && m.hi().is_finite()) {
            return Err(Error::validation("measured T2* interval must be positive and finite"));
        }
    }
    let central = bell_t2star_with_rule(sq1.value, sq2.value, rule)?;
    let (a_lo, a_hi) = (1.0 / sq1.hi(), 1.0 / sq1.lo());
    let (b_lo, b_hi) = (1.0 / sq2.hi(), 1.0 / sq2.lo());
    let (psi_rate_lo, psi_rate_hi, phi_rate_lo, phi_rate_hi) = match rule {
        CombinationRule::Linear => {
            let lo = (a_lo - b_hi).max(b_lo - a_hi).max(0.0);
            let hi = (a_hi - b_lo).abs().max((b_hi - a_lo).abs());
            (lo, hi, a_lo + b_lo, a_hi + b_hi)
        }
        CombinationRule::Quadrature => {
            let (lo, hi) = (a_lo.hypot(b_lo), a_hi.hypot(b_hi));
            (lo, hi, lo, hi)
        }
    };
    let to_interval = |central: CoherenceTime, rate_lo: f64, rate_hi: f64| TimeInterval {
        central,
        lo: 1.0 / rate_hi,
        hi: (rate_lo > 0.0).then(|| 1.0 / rate_lo),
    };
    Ok(BellIntervals {
        psi: to_interval(central.psi, psi_rate_lo, psi_rate_hi),
        phi: to_interval(CoherenceTime::Finite(central.phi), phi_rate_lo, phi_rate_hi),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingSpace {
    /// Minimize Σ(ln T₂ᵢ − ln(C/nᵢ))².
    #[default]
    Log,
    /// Minimize Σ(T₂ᵢ − C/nᵢ)².
    Linear,
}

/// T₂ = C/n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel {
    /// In the time unit of the inputs times concentration fraction.
    pub coefficient: f64,
    /// 1σ of C from the residual scatter (0 for exact data or 1 point of
    /// freedom lost).
    pub coefficient_sigma: f64,
    pub space: ScalingSpace,
    pub residual_norm: f64,
    /// Annotation only: mean nuclear–nuclear coupling C̄, if supplied.
    pub mean_nuclear_coupling: Option<f64>,
    /// Annotation only: characteristic electron–nuclear coupling A_c.
    pub characteristic_coupling: Option<f64>,
}

impl ScalingModel {
    pub fn predict(&self, n: f64) -> f64 {
        self.coefficient / n
    }
}

pub fn fit_t2_scaling(points: &[(f64, f64)], space: ScalingSpace) -> Result<ScalingModel> {
    if points.len() < 2 {
        return Err(Error::validation("scaling fit needs at least 2 points"));
    }
    if points.iter().any(|&(n, t)| !(n > 0.0 && t > 0.0 && n.is_finite() && t.is_finite())) {
        return Err(Error::validation("scaling fit points must be positive"));
    }
    let m = points.len() as f64;
    let (coefficient, residuals): (f64, Vec<f64>) = match space {
        ScalingSpace::Log => {
            let ln_c = points.iter().map(|&(n, t)| (t * n).ln()).sum::<f64>() / m;
            let c = ln_c.exp();
            (c, points.iter().map(|&(n, t)| t.ln() - (c / n).ln()).collect())
        }
        ScalingSpace::Linear => {
            let num: f64 = points.iter().map(|&(n, t)| t / n).sum();
            let den: f64 = points.iter().map(|&(n, _)| 1.0 / (n * n)).sum();
            let c = num / den;
            (c, points.iter().map(|&(n, t)| t - c / n).collect())
        }
    };
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let s2 = rss / (m - 1.0);
    let coefficient_sigma = match space {
        ScalingSpace::Log => coefficient * (s2 / m).sqrt(),
        ScalingSpace::Linear => (s2 / points.iter().map(|&(n, _)| 1.0 / (n * n)).sum::<f64>()).sqrt(),
    };
    Ok(ScalingModel {
        coefficient,
        coefficient_sigma,
        space,
        residual_norm: rss.sqrt(),
        mean_nuclear_coupling: None,
        characteristic_coupling: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn model_values() {
        assert_eq!(fid_model(0.0, 5.0, 1.3, 2.0, 0.5), 2.5);
        assert!((fid_model(5.0, 5.0, 0.0, 2.0, 0.5) - (0.5 + 2.0 / E)).abs() < 1e-15);
        assert_eq!(echo_model(0.0, 650.0, 1.0, 0.1), 1.1);
        assert!((echo_model(650.0, 650.0, 1.0, 0.0) - 1.0 / E).abs() < 1e-15);
    }

    #[test]
    fn bell_rules() {
        let b = bell_t2star_from_sq(41.1, 15.8).unwrap();
        let psi = b.psi.value().unwrap();
        assert!((psi - 25.67).abs() < 0.01, "{psi}");
        assert!((b.phi - 11.41).abs() < 0.01, "{}", b.phi);
        assert!(b.phi < 15.8 && psi > 15.8);
        let eq = bell_t2star_from_sq(20.0, 20.0).unwrap();
        assert_eq!(eq.psi, CoherenceTime::Unbounded);
        assert_eq!(eq.phi, 10.0);
        assert!(bell_t2star_from_sq(0.0, 1.0).is_err());
        let q = bell_t2star_with_rule(3.0, 4.0, CombinationRule::Quadrature).unwrap();
        assert!((q.phi - 2.4).abs() < 1e-12);
    }

    #[test]
    fn bell_intervals() {
        let iv = bell_t2star_intervals(
            Measured::symmetric(41.1, 3.1),
            Measured::symmetric(15.8, 1.4),
            CombinationRule::Linear,
        )
        .unwrap();
        assert!((iv.psi.lo - 21.36).abs() < 0.01, "{:?}", iv.psi);
        assert!((iv.psi.hi.unwrap() - 31.42).abs() < 0.01);
        assert!((iv.phi.lo - 10.44).abs() < 0.01);
        assert!((iv.phi.hi.unwrap() - 12.38).abs() < 0.01);
        assert!(iv.psi.overlaps(&Measured::symmetric(22.0, 3.0)));
        assert!(iv.phi.overlaps(&Measured::symmetric(13.3, 1.1)));
        assert!(!iv.phi.overlaps(&Measured::symmetric(14.0, 1.0)));
        let close = bell_t2star_intervals(
            Measured::symmetric(20.0, 2.0),
            Measured::symmetric(21.0, 2.0),
            CombinationRule::Linear,
        )
        .unwrap();
        assert_eq!(close.psi.hi, None);
    }

    #[test]
    fn scaling_fit() {
        let m = fit_t2_scaling(&[(0.011, 0.65), (0.0035, 1.8)], ScalingSpace::Log).unwrap();
        assert!((m.coefficient - (0.011f64 * 0.65 * 0.0035 * 1.8).sqrt()).abs() < 1e-15);
        assert!((m.predict(0.011) - 0.610).abs() < 1e-3);
        assert!((m.predict(0.0035) - 1.918).abs() < 1e-3);
        let exact = fit_t2_scaling(&[(0.01, 0.7), (0.02, 0.35), (0.1, 0.07)], ScalingSpace::Linear).unwrap();
        assert!((exact.coefficient - 0.007).abs() < 1e-15);
        assert!(exact.residual_norm < 1e-15);
        assert!(fit_t2_scaling(&[(0.01, 1.0)], ScalingSpace::Log).is_err());
        assert!(fit_t2_scaling(&[(0.01, 1.0), (-0.1, 1.0)], ScalingSpace::Log).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let c = DecayCurve::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25], Some(vec![0.1; 3])).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(DecayCurve::from_csv(&buf[..]).unwrap(), c);
        let bad = "t_us,signal\n# note\n0,1\n1,x\n";
        match DecayCurve::from_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(DecayCurve::from_csv("time,y\n0,1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(DecayCurve::from_csv("t_us,signal\n1,1\n0,1\n".as_bytes()).is_err());
    }
}
