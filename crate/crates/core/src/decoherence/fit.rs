//! Damped Gauss-Newton (Levenberg-Marquardt) fits of the FID and echo
//! models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{echo_model, fid_model, DecayCurve, ModelKind, MIN_FIT_POINTS};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

const T_GRID: usize = 48;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum InitialGuess {
    /// Grid search over the nonlinear parameters with the linear ones
    /// (amplitude, offset) solved exactly at each node.
    #[default]
    Auto,
    /// Start from these parameters, in [`ModelKind::parameter_names`]
    /// order.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub initial: InitialGuess,
    pub max_iterations: usize,
    /// Bound on the largest cosine between the residual and a Jacobian
    /// column (a scale-free gradient norm).
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { initial: InitialGuess::Auto, max_iterations: MAX_ITERATIONS, gradient_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: ModelKind,
    /// T₂* or T₂, μs.
    pub t_us: f64,
    /// FID only, rad/μs.
    pub delta_omega: Option<f64>,
    pub amplitude: f64,
    pub offset: f64,
    pub t_sigma: f64,
    pub delta_omega_sigma: Option<f64>,
    pub amplitude_sigma: f64,
    pub offset_sigma: f64,
    /// √Σ rᵢ², with rᵢ weighted by 1/σᵢ when the curve has uncertainties.
    pub residual_norm: f64,
    pub iterations: usize,
    pub gradient: f64,
}

impl DecayFit {
    pub fn parameters(&self) -> Vec<f64> {
        match self.delta_omega {
            Some(w) => vec![self.t_us, w, self.amplitude, self.offset],
            None => vec![self.t_us, self.amplitude, self.offset],
        }
    }

    pub fn uncertainties(&self) -> Vec<f64> {
        match self.delta_omega_sigma {
            Some(w) => vec![self.t_sigma, w, self.amplitude_sigma, self.offset_sigma],
            None => vec![self.t_sigma, self.amplitude_sigma, self.offset_sigma],
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match self.model {
            ModelKind::GaussianFid => {
                fid_model(t, self.t_us, self.delta_omega.unwrap_or(0.0), self.amplitude, self.offset)
            }
            ModelKind::CubicEcho => echo_model(t, self.t_us, self.amplitude, self.offset),
        }
    }

    /// Human-readable report block.
    pub fn report(&self) -> String {
        let mut s = format!("model: {}\n", self.model.name());
        for ((name, v), e) in self.model.parameter_names().iter().zip(self.parameters()).zip(self.uncertainties()) {
            s.push_str(&format!("{name}: {v:.6} +/- {e:.6}\n"));
        }
        s.push_str(&format!("residual_norm: {:.6e}\niterations: {}\n", self.residual_norm, self.iterations));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Fid,
    /// FID with Δω pinned to 0. At Δω = 0 the full model is first-order
    /// degenerate in (T, Δω), so this nested form is fitted alongside.
    FidStatic,
    Echo,
}

impl Shape {
    fn n_params(self) -> usize {
        match self {
            Shape::Fid => 4,
            Shape::FidStatic | Shape::Echo => 3,
        }
    }
}

struct Problem<'a> {
    shape: Shape,
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

struct LmResult {
    p: Vec<f64>,
    cost: f64,
    jacobian: DMatrix<f64>,
    iterations: usize,
    cosine: f64,
}

impl Problem<'_> {
    fn valid(&self, p: &[f64]) -> bool {
        p.iter().all(|v| v.is_finite()) && p[0] > 0.0
    }

    fn value(&self, p: &[f64], t: f64) -> f64 {
        match self.shape {
            Shape::Fid => fid_model(t, p[0], p[1], p[2], p[3]),
            Shape::FidStatic => fid_model(t, p[0], 0.0, p[1], p[2]),
            Shape::Echo => echo_model(t, p[0], p[1], p[2]),
        }
    }

    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.t.len(),
            self.t.iter().zip(self.y).zip(&self.w).map(|((&t, &y), &w)| (y - self.value(p, t)) * w),
        )
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.t.len(), self.shape.n_params());
        for (i, (&t, &w)) in self.t.iter().zip(&self.w).enumerate() {
            match self.shape {
                Shape::Fid => {
                    let (tt, om, a) = (p[0], p[1], p[2]);
                    let g = (-(t / tt).powi(2)).exp();
                    let (s, c) = (om * t).sin_cos();
                    j[(i, 0)] = w * a * g * c * 2.0 * t * t / tt.powi(3);
                    j[(i, 1)] = -w * a * g * t * s;
                    j[(i, 2)] = w * g * c;
                    j[(i, 3)] = w;
                }
                Shape::FidStatic => {
                    let (tt, a) = (p[0], p[1]);
                    let g = (-(t / tt).powi(2)).exp();
                    j[(i, 0)] = w * a * g * 2.0 * t * t / tt.powi(3);
                    j[(i, 1)] = w * g;
                    j[(i, 2)] = w;
                }
                Shape::Echo => {
                    let (tt, a) = (p[0], p[1]);
                    let g = (-(t / tt).powi(3)).exp();
                    j[(i, 0)] = w * a * g * 3.0 * t.powi(3) / tt.powi(4);
                    j[(i, 1)] = w * g;
                    j[(i, 2)] = w;
                }
            }
        }
        j
    }

    /// Largest |cos| between r and a column of J.
    fn gradient_cosine(&self, j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
        let rn = r.norm();
        if rn == 0.0 {
            return 0.0;
        }
        (0..j.ncols())
            .map(|k| {
                let col = j.column(k);
                let cn = col.norm();
                if cn == 0.0 {
                    0.0
                } else {
                    col.dot(r).abs() / (cn * rn)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Best (amplitude, offset, weighted rss) for a fixed basis shape.
    fn linear_solve(&self, basis: &[f64]) -> Option<(f64, f64, f64)> {
        let (mut sw, mut sf, mut sff, mut sy, mut sfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&f, &y), &w) in basis.iter().zip(self.y).zip(&self.w) {
            let w2 = w * w;
            sw += w2;
            sf += w2 * f;
            sff += w2 * f * f;
            sy += w2 * y;
            sfy += w2 * f * y;
        }
        let det = sw * sff - sf * sf;
        if det.abs() <= 1e-12 * sw * sff.max(1e-300) {
            return None;
        }
        let a = (sw * sfy - sf * sy) / det;
        let c = (sff * sy - sf * sfy) / det;
        let rss = basis.iter().zip(self.y).zip(&self.w).map(|((&f, &y), &w)| ((y - a * f - c) * w).powi(2)).sum();
        Some((a, c, rss))
    }

    fn initial_guess(&self) -> Vec<f64> {
        let n = self.t.len();
        let span = self.t[n - 1] - self.t[0];
        let dt = span / (n - 1) as f64;
        let t_lo = dt.max(self.t.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min));
        let t_hi = 3.0 * self.t[n - 1].max(span);
        let t_grid: Vec<f64> =
            (0..T_GRID).map(|k| (t_lo.ln() + (t_hi.ln() - t_lo.ln()) * k as f64 / (T_GRID - 1) as f64).exp()).collect();
        let power = if self.shape == Shape::Echo { 3 } else { 2 };
        let omega_step = std::f64::consts::PI / (4.0 * span);
        let n_omega = if self.shape == Shape::Fid { ((4.0 * span / dt).ceil() as usize).max(1) } else { 0 };
        let cosines: Vec<Vec<f64>> =
            (0..=n_omega).map(|k| self.t.iter().map(|&t| (k as f64 * omega_step * t).cos()).collect()).collect();
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut basis = vec![0.0; n];
        for &tt in &t_grid {
            let env: Vec<f64> = self.t.iter().map(|&t| (-(t / tt).powi(power)).exp()).collect();
            for (k, cs) in cosines.iter().enumerate() {
                for ((b, e), c) in basis.iter_mut().zip(&env).zip(cs) {
                    *b = e * c;
                }
                if let Some((a, c, rss)) = self.linear_solve(&basis) {
                    if best.as_ref().is_none_or(|b| rss < b.0) {
                        let p = match self.shape {
                            Shape::Fid => vec![tt, k as f64 * omega_step, a, c],
                            _ => vec![tt, a, c],
                        };
                        best = Some((rss, p));
                    }
                }
            }
        }
        best.map(|b| b.1).unwrap_or_else(|| match self.shape {
            Shape::Fid => vec![span / 2.0, 0.0, 1.0, 0.0],
            _ => vec![span / 2.0, 1.0, 0.0],
        })
    }

    fn levenberg_marquardt(&self, mut p: Vec<f64>, options: &FitOptions) -> Result<LmResult> {
        let np = self.shape.n_params();
        let y_norm2: f64 = self.y.iter().zip(&self.w).map(|(y, w)| (y * w).powi(2)).sum();
        let mut r = self.residuals(&p);
        let mut cost = r.norm_squared();
        let mut j = self.jacobian(&p);
        let mut lambda = 1e-3;
        let mut iterations = 0;
        let mut cosine = self.gradient_cosine(&j, &r);
        let converged = |cosine: f64, cost: f64| cosine <= options.gradient_tolerance || cost <= 1e-30 * y_norm2;

        while !converged(cosine, cost) {
            if iterations >= options.max_iterations {
                return Err(Error::NonConvergence { iterations, last: p, gradient: cosine });
            }
            iterations += 1;
            let jtj = j.transpose() * &j;
            let g = j.transpose() * &r;
            let diag: Vec<f64> = (0..np).map(|k| jtj[(k, k)].max(1e-300)).collect();
            let mut accepted = false;
            while lambda < 1e16 {
                let mut a = jtj.clone();
                for (k, d) in diag.iter().enumerate() {
                    a[(k, k)] += lambda * d;
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                if self.valid(&trial) {
                    let r_trial = self.residuals(&trial);
                    let c_trial = r_trial.norm_squared();
                    if c_trial <= cost {
                        accepted = c_trial < cost;
                        p = trial;
                        r = r_trial;
                        cost = c_trial;
                        lambda = (lambda / 10.0).max(1e-12);
                        break;
                    }
                }
                lambda *= 10.0;
            }
            j = self.jacobian(&p);
            cosine = self.gradient_cosine(&j, &r);
            if !accepted {
                // No downhill step left in floating point: accept a numerical
                // optimum, otherwise report the stall.
                if cosine <= options.gradient_tolerance.sqrt() {
                    break;
                }
                return Err(Error::NonConvergence { iterations, last: p, gradient: cosine });
            }
        }
        Ok(LmResult { p, cost, jacobian: j, iterations, cosine })
    }
}

/// Fits `model` to `curve`. Deterministic for a given curve and options.
/// 1σ from s²(JᵀJ)⁻¹, or (JᵀJ)⁻¹ when the data carry their own σ. Non-finite
/// when JᵀJ is singular to working precision.
fn parameter_sigmas(fit: &LmResult, np: usize, dof: f64, known_sigma: bool) -> Vec<f64> {
    let s2 = if known_sigma { 1.0 } else { fit.cost / dof };
    let jtj = fit.jacobian.transpose() * &fit.jacobian;
    match jtj.clone().try_inverse() {
        Some(cov) => (0..np)
            .map(|k| {
                let v = (s2 * cov[(k, k)]).sqrt();
                if cov[(k, k)] > 0.0 && v.is_finite() && cov[(k, k)] * jtj[(k, k)] < 1e12 {
                    v
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; np],
    }
}

pub fn fit_decay(curve: &DecayCurve, model: ModelKind, options: &FitOptions) -> Result<DecayFit> {
    curve.validate()?;
    if curve.len() < MIN_FIT_POINTS {
        return Err(Error::validation(format!("fit needs at least {MIN_FIT_POINTS} points, got {}", curve.len())));
    }
    let (lo, hi) = curve.signal.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::FlatSignal);
    }
    let weights = match &curve.sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; curve.len()],
    };
    let problem = |shape| Problem { shape, t: &curve.times_us, y: &curve.signal, w: weights.clone() };
    let start = |p: &Problem| -> Result<Vec<f64>> {
        match &options.initial {
            InitialGuess::Auto => Ok(p.initial_guess()),
            InitialGuess::Explicit(v) => {
                let v = match (p.shape, v.len()) {
                    (Shape::FidStatic, 4) => vec![v[0], v[2], v[3]],
                    _ => v.clone(),
                };
                if v.len() != p.shape.n_params() || !p.valid(&v) {
                    return Err(Error::validation(format!(
                        "initial guess needs {} finite values with T > 0",
                        model.parameter_names().len()
                    )));
                }
                Ok(v)
            }
        }
    };

    let dof = curve.len().saturating_sub(model.parameter_names().len()).max(1) as f64;
    let known_sigma = curve.sigma.is_some();
    let (shape, fit) = match model {
        ModelKind::CubicEcho => {
            let p = problem(Shape::Echo);
            (Shape::Echo, p.levenberg_marquardt(start(&p)?, options)?)
        }
        ModelKind::GaussianFid => {
            let full = problem(Shape::Fid);
            let full_fit = full.levenberg_marquardt(start(&full)?, options);
            // Δω ≈ 0 leaves the full model without a usable covariance;
            // the nested static form is then the better-posed answer
            let degenerate = match &full_fit {
                Ok(f) => !parameter_sigmas(f, 4, dof, known_sigma).iter().take(2).all(|s| s.is_finite()),
                Err(_) => true,
            };
            if degenerate {
                let fixed = problem(Shape::FidStatic);
                match (fixed.levenberg_marquardt(start(&fixed)?, options), full_fit) {
                    (Ok(f), _) => (Shape::FidStatic, f),
                    (Err(_), Ok(f)) => (Shape::Fid, f),
                    (Err(_), Err(err)) => return Err(err),
                }
            } else {
                (Shape::Fid, full_fit?)
            }
        }
    };

    let sigmas = parameter_sigmas(&fit, shape.n_params(), dof, known_sigma);
    let p = fit.p;
    let (residual_norm, iterations, gradient) = (fit.cost.sqrt(), fit.iterations, fit.cosine);
    Ok(match shape {
        Shape::Fid => DecayFit {
            model,
            t_us: p[0],
            delta_omega: Some(p[1].abs()),
            amplitude: p[2],
            offset: p[3],
            t_sigma: sigmas[0],
            delta_omega_sigma: Some(sigmas[1]),
            amplitude_sigma: sigmas[2],
            offset_sigma: sigmas[3],
            residual_norm,
            iterations,
            gradient,
        },
        // Δω sits on the degenerate point; its local 1σ is unbounded.
        Shape::FidStatic => DecayFit {
            model,
            t_us: p[0],
            delta_omega: Some(0.0),
            amplitude: p[1],
            offset: p[2],
            t_sigma: sigmas[0],
            delta_omega_sigma: Some(f64::INFINITY),
            amplitude_sigma: sigmas[1],
            offset_sigma: sigmas[2],
            residual_norm,
            iterations,
            gradient,
        },
        Shape::Echo => DecayFit {
            model,
            t_us: p[0],
            delta_omega: None,
            amplitude: p[1],
            offset: p[2],
            t_sigma: sigmas[0],
            delta_omega_sigma: None,
            amplitude_sigma: sigmas[1],
            offset_sigma: sigmas[2],
            residual_norm,
            iterations,
            gradient,
        },
    })
}
