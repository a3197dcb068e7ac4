//! Density-matrix simulation of selective MW/RF pulse sequences on the
//! electron–nuclear register.
//!
//! The register basis is the eigenbasis of the static Hamiltonian. Every
//! eigenstate gets a label (m_s, bits): m_s from ⟨S_z⟩, and `bits` the rank
//! of the state by energy inside its m_s manifold, written in binary with
//! nucleus 1 as the most significant bit. Qubit 0 is the electron (0 ≡
//! m_s = 0, 1 ≡ m_s = −1); qubits 1..=N are the nuclei. Free evolution runs
//! in the frame rotating with the static Hamiltonian unless static phases
//! are requested.

mod circuits;
mod sequence_file;

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spinsys::{electron_projection, solve, CMatrix, EigenSystem, SpinSystemSpec};
use crate::{Error, Result};

pub use circuits::{
    bell_circuit, bell_fidelity_under_detuning, bell_prepare_and_fidelity, bell_target, endor_sequence,
    hahn_echo_sequence, rabi_frequency, rabi_simulate, swap_sequence, swap_transfer_efficiency, BellVariant, Drive,
    DEFAULT_KAPPA,
};
pub use sequence_file::{parse_level, parse_sequence};

/// Energy gap below which a transition counts as degenerate, MHz.
pub const DEGENERACY_TOLERANCE_MHZ: f64 = 1e-6;

const MS_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub ms: i8,
    pub bits: usize,
}

impl Label {
    pub fn new(ms: i8, bits: usize) -> Self {
        Self { ms, bits }
    }

    /// State of `qubit`: 0 is the electron, 1..=n the nuclei. `None` for the
    /// electron qubit of an m_s = +1 level.
    pub fn qubit(&self, qubit: usize, n_nuclei: usize) -> Option<u8> {
        if qubit == 0 {
            match self.ms {
                0 => Some(0),
                -1 => Some(1),
                _ => None,
            }
        } else {
            Some(((self.bits >> (n_nuclei - qubit)) & 1) as u8)
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:b}", self.ms, self.bits)
    }
}

/// Static spin system, its eigenbasis and the level labels.
#[derive(Debug, Clone)]
pub struct Register {
    pub spec: SpinSystemSpec,
    pub eigen: EigenSystem,
    pub labels: Vec<Label>,
}

impl Register {
    pub fn new(spec: SpinSystemSpec) -> Result<Self> {
        let eigen = solve(&spec)?;
        let n = spec.nuclei.len();
        let sz = electron_projection(&eigen, n);
        let mut ms = Vec::with_capacity(sz.len());
        for (k, &v) in sz.iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > MS_TOLERANCE {
                return Err(Error::validation(format!("level {k} has mixed electron character <S_z> = {v:.3}")));
            }
            ms.push(r as i8);
        }
        let mut labels = vec![Label::new(0, 0); ms.len()];
        for m in [-1i8, 0, 1] {
            let members: Vec<usize> = (0..ms.len()).filter(|&k| ms[k] == m).collect();
            if members.len() != 1 << n {
                return Err(Error::validation(format!(
                    "m_s = {m} manifold has {} levels, expected {}",
                    members.len(),
                    1 << n
                )));
            }
            // eigenvalues are ascending, so rank = order of appearance
            for (rank, &k) in members.iter().enumerate() {
                labels[k] = Label::new(m, rank);
            }
        }
        Ok(Self { spec, eigen, labels })
    }

    pub fn n_nuclei(&self) -> usize {
        self.spec.nuclei.len()
    }

    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: Label) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::validation(format!("no level labelled {label}")))
    }

    /// `ms:bits` with the bits zero-padded to the register width, the form
    /// sequence files accept.
    pub fn label_name(&self, index: usize) -> String {
        let l = self.labels[index];
        let n = self.n_nuclei();
        if n == 0 {
            format!("{}:", l.ms)
        } else {
            format!("{}:{:0n$b}", l.ms, l.bits)
        }
    }

    pub fn energy(&self, index: usize) -> f64 {
        self.eigen.values[index]
    }

    /// Checks that `channel` may drive `i ↔ j` and that the gap is
    /// resolvable.
    pub fn check_transition(&self, channel: Channel, i: usize, j: usize) -> Result<()> {
        let d = self.dimension();
        if i >= d || j >= d || i == j {
            return Err(Error::validation(format!("invalid transition {i}<->{j} in a {d}-level register")));
        }
        let (a, b) = (self.labels[i], self.labels[j]);
        match channel {
            Channel::Mw if a.ms == b.ms => {
                return Err(Error::validation(format!("MW pulse {a}<->{b} does not change m_s")));
            }
            Channel::Rf if a.ms != b.ms => {
                return Err(Error::validation(format!("RF pulse {a}<->{b} changes m_s")));
            }
            _ => {}
        }
        let gap = (self.energy(i) - self.energy(j)).abs();
        if gap < DEGENERACY_TOLERANCE_MHZ {
            return Err(Error::Ambiguity { i, j, gap_mhz: gap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Mw,
    Rf,
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mw" => Ok(Channel::Mw),
            "rf" => Ok(Channel::Rf),
            _ => Err(Error::validation(format!("unknown channel {s:?}"))),
        }
    }
}

/// Annotation requiring both target levels to have `qubit` in `state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub state: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub channel: Channel,
    pub target: (usize, usize),
    pub angle: f64,
    pub phase: f64,
    /// `None` for an ideal instantaneous rotation; otherwise the pulse
    /// length in μs, with Ω = angle/duration.
    pub duration_us: Option<f64>,
    /// Drive detuning from the target transition, rad/μs (finite pulses).
    pub detuning: f64,
    pub control: Option<Control>,
}

impl Pulse {
    pub fn ideal(channel: Channel, i: usize, j: usize, angle: f64, phase: f64) -> Self {
        Self { channel, target: (i, j), angle, phase, duration_us: None, detuning: 0.0, control: None }
    }

    pub fn with_control(mut self, qubit: usize, state: u8) -> Self {
        self.control = Some(Control { qubit, state });
        self
    }

    pub fn validate(&self, reg: &Register) -> Result<()> {
        if !self.angle.is_finite() || !self.phase.is_finite() || !self.detuning.is_finite() {
            return Err(Error::validation("pulse angle, phase and detuning must be finite"));
        }
        if let Some(d) = self.duration_us {
            if !(d >= 0.0 && d.is_finite()) || (d == 0.0 && self.angle != 0.0) {
                return Err(Error::validation("pulse duration must be positive"));
            }
        }
        reg.check_transition(self.channel, self.target.0, self.target.1)?;
        if let Some(c) = self.control {
            let n = reg.n_nuclei();
            if c.qubit > n {
                return Err(Error::validation(format!("control qubit {} does not exist ({} qubits)", c.qubit, n + 1)));
            }
            if c.state > 1 {
                return Err(Error::validation(format!("control state {} is not 0 or 1", c.state)));
            }
            for k in [self.target.0, self.target.1] {
                if reg.labels[k].qubit(c.qubit, n) != Some(c.state) {
                    return Err(Error::validation(format!(
                        "level {} does not have qubit {} in state {}",
                        reg.labels[k], c.qubit, c.state
                    )));
                }
            }
        }
        Ok(())
    }

    /// 2×2 propagator on (i, j).
    fn block(&self) -> [[Complex64; 2]; 2] {
        let (omega_t, delta_t) = match self.duration_us {
            None => (self.angle, 0.0),
            Some(d) => (self.angle, self.detuning * d),
        };
        let eff = omega_t.hypot(delta_t);
        if eff == 0.0 {
            return [
                [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            ];
        }
        let (nx, ny, nz) = (omega_t * self.phase.cos() / eff, omega_t * self.phase.sin() / eff, delta_t / eff);
        let (s, c) = (eff / 2.0).sin_cos();
        let mi = Complex64::new(0.0, -s);
        [
            [Complex64::new(c, 0.0) + mi * nz, mi * Complex64::new(nx, -ny)],
            [mi * Complex64::new(nx, ny), Complex64::new(c, 0.0) - mi * nz],
        ]
    }
}

/// Static per-qubit detunings applied during free evolution, rad/μs. A
/// nucleus in bit 0 carries m = +½, bit 1 m = −½.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeEvolution {
    pub nuclear_detunings: Vec<f64>,
    pub electron_detuning: f64,
    /// Also accumulate 2π·E_k·t from the static eigenvalues (lab frame).
    pub static_phases: bool,
}

impl FreeEvolution {
    pub fn uniform(n_nuclei: usize, detuning: f64) -> Self {
        Self { nuclear_detunings: vec![detuning; n_nuclei], ..Self::default() }
    }

    fn phase_rate(&self, reg: &Register, k: usize) -> Result<f64> {
        let n = reg.n_nuclei();
        if !self.nuclear_detunings.is_empty() && self.nuclear_detunings.len() != n {
            return Err(Error::validation(format!(
                "{} nuclear detunings for {n} nuclei",
                self.nuclear_detunings.len()
            )));
        }
        let label = reg.labels[k];
        let mut rate = self.electron_detuning * f64::from(label.ms);
        for (q, d) in self.nuclear_detunings.iter().enumerate() {
            let m = if label.qubit(q + 1, n) == Some(0) { 0.5 } else { -0.5 };
            rate += d * m;
        }
        if self.static_phases {
            rate += 2.0 * PI * reg.energy(k);
        }
        Ok(rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SequenceStep {
    Pulse(Pulse),
    /// Free evolution for this many μs.
    Wait(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub steps: Vec<SequenceStep>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pulse(mut self, p: Pulse) -> Self {
        self.steps.push(SequenceStep::Pulse(p));
        self
    }

    pub fn wait(mut self, us: f64) -> Self {
        self.steps.push(SequenceStep::Wait(us));
        self
    }

    pub fn then(mut self, other: &PulseSequence) -> Self {
        self.steps.extend(other.steps.iter().cloned());
        self
    }

    pub fn validate(&self, reg: &Register) -> Result<()> {
        for step in &self.steps {
            match step {
                SequenceStep::Pulse(p) => p.validate(reg)?,
                SequenceStep::Wait(t) if !(*t >= 0.0 && t.is_finite()) => {
                    return Err(Error::validation(format!("wait of {t} us")));
                }
                SequenceStep::Wait(_) => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// m_s = 0 with maximally mixed nuclei.
    MixedNuclear,
    Pure(Label),
}

impl InitialState {
    /// Ideal initialization: |m_s = 0, 0…0⟩.
    pub fn ideal() -> Self {
        InitialState::Pure(Label::new(0, 0))
    }
}

/// Density matrix in the register eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterState {
    pub rho: CMatrix,
}

impl RegisterState {
    pub fn initial(reg: &Register, init: InitialState) -> Result<Self> {
        let d = reg.dimension();
        let mut rho = CMatrix::zeros(d, d);
        match init {
            InitialState::MixedNuclear => {
                let w = 1.0 / (1usize << reg.n_nuclei()) as f64;
                for (k, l) in reg.labels.iter().enumerate() {
                    if l.ms == 0 {
                        rho[(k, k)] = Complex64::new(w, 0.0);
                    }
                }
            }
            InitialState::Pure(label) => {
                let k = reg.index_of(label)?;
                rho[(k, k)] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(Self { rho })
    }

    pub fn from_vector(psi: &DVector<Complex64>) -> Self {
        Self { rho: psi * psi.adjoint() }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.rho.nrows()).map(|k| self.rho[(k, k)].re).collect()
    }

    pub fn population(&self, reg: &Register, label: Label) -> Result<f64> {
        Ok(self.rho[(reg.index_of(label)?, reg.index_of(label)?)].re)
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn fidelity(&self, psi: &DVector<Complex64>) -> f64 {
        (psi.adjoint() * &self.rho * psi)[(0, 0)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::validation(format!("density matrix not Hermitian (defect {herm:e})")));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::validation(format!("trace {} != 1", self.trace())));
        }
        if self.min_eigenvalue() < -1e-9 {
            return Err(Error::validation("density matrix is not positive semidefinite"));
        }
        Ok(())
    }
}

pub fn apply_pulse(reg: &Register, state: &RegisterState, pulse: &Pulse) -> Result<RegisterState> {
    pulse.validate(reg)?;
    Ok(apply_block(state, pulse.target, pulse.block()))
}

/// ρ → UρU† for U equal to the identity outside the (i, j) block.
fn apply_block(state: &RegisterState, (i, j): (usize, usize), u: [[Complex64; 2]; 2]) -> RegisterState {
    let mut rho = state.rho.clone();
    let d = rho.nrows();
    // rows: U·ρ
    for c in 0..d {
        let (a, b) = (rho[(i, c)], rho[(j, c)]);
        rho[(i, c)] = u[0][0] * a + u[0][1] * b;
        rho[(j, c)] = u[1][0] * a + u[1][1] * b;
    }
    // columns: (Uρ)·U†
    for r in 0..d {
        let (a, b) = (rho[(r, i)], rho[(r, j)]);
        rho[(r, i)] = a * u[0][0].conj() + b * u[0][1].conj();
        rho[(r, j)] = a * u[1][0].conj() + b * u[1][1].conj();
    }
    RegisterState { rho }
}

/// Diagonal free evolution ρ_kl → ρ_kl·exp(−i(φ_k − φ_l)).
pub fn free_evolve(reg: &Register, state: &RegisterState, model: &FreeEvolution, t_us: f64) -> Result<RegisterState> {
    let phases: Vec<f64> =
        (0..reg.dimension()).map(|k| model.phase_rate(reg, k).map(|r| r * t_us)).collect::<Result<_>>()?;
    let mut rho = state.rho.clone();
    for k in 0..rho.nrows() {
        for l in 0..rho.ncols() {
            if k != l {
                rho[(k, l)] *= Complex64::from_polar(1.0, -(phases[k] - phases[l]));
            }
        }
    }
    Ok(RegisterState { rho })
}

/// Evolves `state` through `sequence`.
pub fn run_sequence_from(
    reg: &Register,
    sequence: &PulseSequence,
    state: &RegisterState,
    evolution: &FreeEvolution,
) -> Result<RegisterState> {
    sequence.validate(reg)?;
    let mut s = state.clone();
    for step in &sequence.steps {
        s = match step {
            SequenceStep::Pulse(p) => apply_block(&s, p.target, p.block()),
            SequenceStep::Wait(t) => free_evolve(reg, &s, evolution, *t)?,
        };
    }
    Ok(s)
}

/// Runs `sequence` from `init`, returning the final state.
pub fn run_sequence(
    reg: &Register,
    sequence: &PulseSequence,
    init: InitialState,
    evolution: &FreeEvolution,
) -> Result<RegisterState> {
    run_sequence_from(reg, sequence, &RegisterState::initial(reg, init)?, evolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::HyperfineTensor;

    fn register2() -> Register {
        Register::new(SpinSystemSpec::with_nuclei(vec![
            HyperfineTensor::first_shell(0),
            HyperfineTensor::third_shell(),
        ]))
        .unwrap()
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn labels_cover_manifolds() {
        let reg = register2();
        assert_eq!(reg.dimension(), 12);
        for m in [-1i8, 0, 1] {
            for b in 0..4 {
                reg.index_of(Label::new(m, b)).unwrap();
            }
        }
        let l = Label::new(-1, 0b10);
        assert_eq!(l.qubit(0, 2), Some(1));
        assert_eq!(l.qubit(1, 2), Some(1));
        assert_eq!(l.qubit(2, 2), Some(0));
    }

    #[test]
    fn rotations() {
        let reg = register2();
        let (a, b) = (reg.index_of(Label::new(-1, 0)).unwrap(), reg.index_of(Label::new(-1, 1)).unwrap());
        let s0 = RegisterState::initial(&reg, InitialState::Pure(Label::new(-1, 0))).unwrap();
        let full = apply_pulse(&reg, &s0, &Pulse::ideal(Channel::Rf, a, b, 2.0 * PI, 0.3)).unwrap();
        assert!(close(&full.rho, &s0.rho, 1e-12));
        let flip = apply_pulse(&reg, &s0, &Pulse::ideal(Channel::Rf, a, b, PI, 0.0)).unwrap();
        assert!((flip.population(&reg, Label::new(-1, 1)).unwrap() - 1.0).abs() < 1e-12);
        let half = Pulse::ideal(Channel::Rf, a, b, PI / 2.0, 0.7);
        let twice = apply_pulse(&reg, &apply_pulse(&reg, &s0, &half).unwrap(), &half).unwrap();
        let once = apply_pulse(&reg, &s0, &Pulse::ideal(Channel::Rf, a, b, PI, 0.7)).unwrap();
        assert!(close(&twice.rho, &once.rho, 1e-12));
        twice.validate().unwrap();
    }

    #[test]
    fn finite_pulse_matches_ideal_on_resonance() {
        let reg = register2();
        let (a, b) = (reg.index_of(Label::new(0, 0)).unwrap(), reg.index_of(Label::new(-1, 0)).unwrap());
        let s0 = RegisterState::initial(&reg, InitialState::MixedNuclear).unwrap();
        let ideal = Pulse::ideal(Channel::Mw, a, b, 1.1, 0.4);
        let finite = Pulse { duration_us: Some(0.05), ..ideal.clone() };
        let x = apply_pulse(&reg, &s0, &ideal).unwrap();
        let y = apply_pulse(&reg, &s0, &finite).unwrap();
        assert!(close(&x.rho, &y.rho, 1e-14));
        let detuned = Pulse { detuning: 30.0, ..finite };
        let z = apply_pulse(&reg, &s0, &detuned).unwrap();
        assert!((z.trace() - 1.0).abs() < 1e-12);
        assert!(z.rho[(b, b)].re < x.rho[(b, b)].re);
    }

    #[test]
    fn channel_and_control_checks() {
        let reg = register2();
        let (a, b) = (reg.index_of(Label::new(0, 0)).unwrap(), reg.index_of(Label::new(-1, 0)).unwrap());
        let s0 = RegisterState::initial(&reg, InitialState::ideal()).unwrap();
        assert!(apply_pulse(&reg, &s0, &Pulse::ideal(Channel::Rf, a, b, PI, 0.0)).is_err());
        let c = reg.index_of(Label::new(0, 1)).unwrap();
        assert!(apply_pulse(&reg, &s0, &Pulse::ideal(Channel::Mw, a, c, PI, 0.0)).is_err());
        let ok = Pulse::ideal(Channel::Mw, a, b, PI, 0.0).with_control(1, 0);
        apply_pulse(&reg, &s0, &ok).unwrap();
        let missing = Pulse::ideal(Channel::Mw, a, b, PI, 0.0).with_control(5, 0);
        assert!(matches!(apply_pulse(&reg, &s0, &missing), Err(Error::Validation(_))));
        let wrong = Pulse::ideal(Channel::Mw, a, b, PI, 0.0).with_control(2, 1);
        assert!(apply_pulse(&reg, &s0, &wrong).is_err());
    }

    #[test]
    fn degenerate_pair_is_ambiguous() {
        // two uncoupled nuclei: |01⟩ and |10⟩ degenerate in every manifold
        let spec = SpinSystemSpec::with_nuclei(vec![HyperfineTensor::isotropic(0.0), HyperfineTensor::isotropic(0.0)]);
        let reg = Register::new(spec).unwrap();
        let found = (0..reg.dimension()).flat_map(|i| (0..reg.dimension()).map(move |j| (i, j))).any(|(i, j)| {
            i != j
                && reg.labels[i].ms == reg.labels[j].ms
                && matches!(reg.check_transition(Channel::Rf, i, j), Err(Error::Ambiguity { .. }))
        });
        assert!(found);
    }

    #[test]
    fn free_evolution_phases() {
        let reg = register2();
        let (a, b) = (reg.index_of(Label::new(-1, 0)).unwrap(), reg.index_of(Label::new(-1, 2)).unwrap());
        let s = apply_pulse(
            &reg,
            &RegisterState::initial(&reg, InitialState::Pure(Label::new(-1, 0))).unwrap(),
            &Pulse::ideal(Channel::Rf, a, b, PI / 2.0, 0.0),
        )
        .unwrap();
        let model = FreeEvolution { nuclear_detunings: vec![0.2, 0.0], ..Default::default() };
        let t = PI / 0.2;
        let e = free_evolve(&reg, &s, &model, t).unwrap();
        // relative phase π between bit-1 = 0 and bit-1 = 1
        assert!((e.rho[(a, b)] + s.rho[(a, b)]).norm() < 1e-12);
        assert!((e.purity() - 1.0).abs() < 1e-12);
        assert!(free_evolve(&reg, &s, &FreeEvolution::uniform(3, 0.1), 1.0).is_err());
    }
}
