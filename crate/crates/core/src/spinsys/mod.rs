//! Spin Hamiltonian of an S = 1 electron coupled to up to six ¹³C nuclei,
//! its exact diagonalization, and the resulting ESR spectra.
//!
//! All Hamiltonians are in linear frequency units (MHz); fields are in
//! Gauss. Internally every vector is expressed in the NV frame whose z axis
//! is the zero-field-splitting axis.

pub mod operators;
pub mod spectrum;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::numeric::{cross3, dot3, norm3, normalize3, scale3, sub3};
use crate::{Error, Result};
pub use operators::CMatrix;
use operators::{electron_full, electron_nuclear, embed_nuclear, spin_half, spin_one};

pub use spectrum::{esr_transitions, synth_spectrum, FrequencyGrid, LineSelection, Spectrum, TransitionLine};

/// Largest nuclear register handled by exact diagonalization (192 × 192).
pub const MAX_NUCLEI: usize = 6;

/// Unit-vector tolerance for axis validation.
const UNIT_TOL: f64 = 1e-12;

/// The [111] crystal axis.
pub fn nv_axis() -> [f64; 3] {
    normalize3([1.0, 1.0, 1.0])
}

fn check_unit(v: [f64; 3], what: &str) -> Result<()> {
    let n = norm3(v);
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::validation(format!("{what} must be a unit vector (norm {n})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZfsParams {
    pub d_mhz: f64,
    /// Principal axis in crystal coordinates.
    pub axis: [f64; 3],
}

impl Default for ZfsParams {
    fn default() -> Self {
        Self { d_mhz: 2870.0, axis: nv_axis() }
    }
}

/// Axially symmetric hyperfine tensor. The principal axis is placed at
/// `polar_deg` from the ZFS axis and `azimuth_deg` around it, measured from
/// the NV-frame x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineTensor {
    pub a_par_mhz: f64,
    pub a_perp_mhz: f64,
    pub polar_deg: f64,
    pub azimuth_deg: f64,
}

impl HyperfineTensor {
    /// First-shell ¹³C at one of the three C₃ᵥ-equivalent dangling-bond
    /// sites (`site` 0, 1, 2 → azimuth 0°, 120°, 240°).
    pub fn first_shell(site: usize) -> Self {
        Self { a_par_mhz: 205.0, a_perp_mhz: 123.0, polar_deg: 106.0, azimuth_deg: 120.0 * (site % 3) as f64 }
    }

    /// Third-shell ¹³C, modelled as isotropic.
    pub fn third_shell() -> Self {
        Self::isotropic(14.0)
    }

    pub fn isotropic(a_mhz: f64) -> Self {
        Self { a_par_mhz: a_mhz, a_perp_mhz: a_mhz, polar_deg: 0.0, azimuth_deg: 0.0 }
    }

    /// Same tensor with both principal values scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { a_par_mhz: self.a_par_mhz * factor, a_perp_mhz: self.a_perp_mhz * factor, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_par_mhz.is_finite() && self.a_perp_mhz.is_finite() && self.azimuth_deg.is_finite()) {
            return Err(Error::validation("hyperfine parameters must be finite"));
        }
        if !(0.0..=180.0).contains(&self.polar_deg) {
            return Err(Error::validation(format!(
                "hyperfine polar angle {} outside [0, 180] degrees",
                self.polar_deg
            )));
        }
        Ok(())
    }

    /// Principal axis in NV-frame components.
    pub fn principal_axis(&self) -> [f64; 3] {
        let (t, p) = (self.polar_deg.to_radians(), self.azimuth_deg.to_radians());
        [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
    }

    /// Cartesian tensor in the NV frame: A_⊥·1 + (A_∥ − A_⊥)·u uᵀ.
    pub fn tensor(&self) -> [[f64; 3]; 3] {
        let u = self.principal_axis();
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let delta = if i == j { self.a_perp_mhz } else { 0.0 };
                *v = delta + (self.a_par_mhz - self.a_perp_mhz) * u[i] * u[j];
            }
        }
        a
    }

    /// Magnitude of the hyperfine field seen by the nucleus when the
    /// electron is in |m_s| = 1, |A·ẑ| in MHz.
    pub fn effective_coupling_mhz(&self) -> f64 {
        let a = self.tensor();
        norm3([a[0][2], a[1][2], a[2][2]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeemanField {
    pub gauss: f64,
    /// Unit direction in crystal coordinates.
    pub direction: [f64; 3],
}

impl ZeemanField {
    pub fn along_nv(gauss: f64) -> Self {
        Self { gauss, direction: nv_axis() }
    }

    pub fn zero() -> Self {
        Self::along_nv(0.0)
    }
}

impl Default for ZeemanField {
    /// 83 G along the NV axis, the field used for the register spectra.
    fn default() -> Self {
        Self::along_nv(83.0)
    }
}

/// Orthonormal NV frame: z along the ZFS axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NvFrame {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub z: [f64; 3],
}

impl NvFrame {
    pub fn from_axis(axis: [f64; 3]) -> Self {
        let z = normalize3(axis);
        // reference: the crystal axis least aligned with z, first on ties
        let mut k = 0;
        for i in 1..3 {
            if z[i].abs() < z[k].abs() - 1e-12 {
                k = i;
            }
        }
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let x = normalize3(sub3(e, scale3(z, dot3(e, z))));
        let y = cross3(z, x);
        Self { x, y, z }
    }

    /// Crystal-frame vector → NV-frame components.
    pub fn to_local(&self, v: [f64; 3]) -> [f64; 3] {
        [dot3(v, self.x), dot3(v, self.y), dot3(v, self.z)]
    }
}

/// Electron plus nuclear register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemSpec {
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub zfs: ZfsParams,
    #[serde(default)]
    pub field: ZeemanField,
    #[serde(default)]
    pub nuclei: Vec<HyperfineTensor>,
}

impl Default for SpinSystemSpec {
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::default(),
            zfs: ZfsParams::default(),
            field: ZeemanField::default(),
            nuclei: Vec::new(),
        }
    }
}

impl SpinSystemSpec {
    pub fn with_nuclei(nuclei: Vec<HyperfineTensor>) -> Self {
        Self { nuclei, ..Self::default() }
    }

    /// `k` first-shell nuclei on distinct equivalent sites, 83 G along [111].
    pub fn first_shell(k: usize) -> Self {
        Self::with_nuclei((0..k).map(HyperfineTensor::first_shell).collect())
    }

    pub fn dimension(&self) -> usize {
        3 << self.nuclei.len()
    }

    pub fn frame(&self) -> NvFrame {
        NvFrame::from_axis(self.zfs.axis)
    }

    /// Field vector in the NV frame, Gauss.
    pub fn field_local(&self) -> [f64; 3] {
        scale3(self.frame().to_local(self.field.direction), self.field.gauss)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nuclei.len() > MAX_NUCLEI {
            return Err(Error::DimensionLimit { nuclei: self.nuclei.len(), max: MAX_NUCLEI });
        }
        self.constants.validate()?;
        if !self.zfs.d_mhz.is_finite() {
            return Err(Error::validation("ZFS D must be finite"));
        }
        check_unit(self.zfs.axis, "ZFS axis")?;
        check_unit(self.field.direction, "field direction")?;
        if !(self.field.gauss.is_finite() && self.field.gauss >= 0.0) {
            return Err(Error::validation("field magnitude must be finite and non-negative"));
        }
        self.nuclei.iter().try_for_each(HyperfineTensor::validate)
    }
}

/// H = g_eβ_e S·B + S·D·S + Σᵢ (S·Aᵢ·Iᵢ − g_nβ_n Iᵢ·B), in MHz.
///
/// The ZFS term is D·S_z² (no trace subtraction), so m_s = 0 sits at zero
/// energy at zero field.
pub fn build_hamiltonian(spec: &SpinSystemSpec) -> Result<CMatrix> {
    spec.validate()?;
    let n = spec.nuclei.len();
    let s = spin_one();
    let i_ops = spin_half();
    let b = spec.field_local();
    let ge = spec.constants.electron_mhz_per_gauss();
    let gn = spec.constants.nuclear_mhz_per_gauss();

    let mut electron = &s[2] * &s[2] * Complex64::from(spec.zfs.d_mhz);
    for a in 0..3 {
        electron += &s[a] * Complex64::from(ge * b[a]);
    }
    let mut h = electron_full(&electron, n);

    let e_identity = operators::identity(3);
    for (q, hf) in spec.nuclei.iter().enumerate() {
        let a = hf.tensor();
        let nuc: Vec<CMatrix> = i_ops.iter().map(|op| embed_nuclear(op, q, n)).collect();
        for (ia, sa) in s.iter().enumerate() {
            // Σ_b A_ab I_b for this electron component
            let mut coupled = CMatrix::zeros(1 << n, 1 << n);
            for (ib, ib_op) in nuc.iter().enumerate() {
                if a[ia][ib] != 0.0 {
                    coupled += ib_op * Complex64::from(a[ia][ib]);
                }
            }
            h += electron_nuclear(sa, &coupled);
        }
        let mut zeeman = CMatrix::zeros(1 << n, 1 << n);
        for (ib, ib_op) in nuc.iter().enumerate() {
            zeeman -= ib_op * Complex64::from(gn * b[ib]);
        }
        h += electron_nuclear(&e_identity, &zeeman);
    }
    Ok(h)
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (columns).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    /// V·diag(λ)·V†
    pub fn reconstruct(&self) -> CMatrix {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| Complex64::from(v)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Largest ‖Hv − λv‖ over the eigenpairs.
    pub fn max_residual(&self, h: &CMatrix) -> f64 {
        (0..self.dimension())
            .map(|k| {
                let v = self.vectors.column(k);
                (h * v - v * Complex64::from(self.values[k])).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Operator in the eigenbasis, V†·O·V.
    pub fn transform(&self, op: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * op * &self.vectors
    }
}

/// Largest |H − H†| entry relative to the largest |H| entry.
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let defect = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        defect
    } else {
        defect / scale
    }
}

/// Exact diagonalization of a Hermitian matrix.
pub fn diagonalize(h: &CMatrix) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(Error::validation("matrix is not square"));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let defect = hermiticity_defect(h);
    if defect > 1e-10 {
        return Err(Error::validation(format!("matrix is not Hermitian (relative defect {defect:e})")));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    // stable sort: ties keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(h.nrows(), h.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem { values, vectors })
}

/// Diagonalize the Hamiltonian of `spec`.
pub fn solve(spec: &SpinSystemSpec) -> Result<EigenSystem> {
    diagonalize(&build_hamiltonian(spec)?)
}

/// ⟨S_z⟩ (NV frame) of every eigenstate.
pub fn electron_projection(eig: &EigenSystem, n_nuclei: usize) -> Vec<f64> {
    let sz = electron_full(&spin_one()[2], n_nuclei);
    let m = eig.transform(&sz);
    (0..eig.dimension()).map(|k| m[(k, k)].re).collect()
}
