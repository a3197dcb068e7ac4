//! Standard sequences: Rabi nutation, ENDOR, Hahn echo, electron–nuclear
//! SWAP and Bell-state preparation.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    apply_pulse, free_evolve, run_sequence, Channel, FreeEvolution, InitialState, Label, Pulse, PulseSequence,
    Register, RegisterState,
};
use crate::decoherence::DecayCurve;
use crate::{Error, Result};

/// Default enhancement constant κ in Ω = κ·|A|·√P, rad/μs per (MHz·√P).
pub const DEFAULT_KAPPA: f64 = 1e-3;

/// Drive strength. RF: Ω = κ·|A_q|·√P with A_q the coupling of the flipped
/// nucleus (hyperfine enhancement). MW: Ω = κ·√P·(1 MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub power: f64,
    pub kappa: f64,
}

impl Drive {
    pub fn new(power: f64) -> Self {
        Self { power, kappa: DEFAULT_KAPPA }
    }
}

fn flipped_nucleus(reg: &Register, i: usize, j: usize) -> Result<usize> {
    let diff = reg.labels[i].bits ^ reg.labels[j].bits;
    if diff.count_ones() != 1 {
        return Err(Error::validation(format!(
            "RF transition {}<->{} does not flip exactly one nucleus",
            reg.labels[i], reg.labels[j]
        )));
    }
    Ok(reg.n_nuclei() - diff.trailing_zeros() as usize)
}

/// Rabi angular frequency of `i ↔ j` under `drive`, rad/μs.
pub fn rabi_frequency(reg: &Register, channel: Channel, (i, j): (usize, usize), drive: &Drive) -> Result<f64> {
    reg.check_transition(channel, i, j)?;
    if !(drive.power >= 0.0 && drive.power.is_finite() && drive.kappa > 0.0 && drive.kappa.is_finite()) {
        return Err(Error::validation("drive power must be non-negative and kappa positive"));
    }
    Ok(match channel {
        Channel::Mw => drive.kappa * drive.power.sqrt(),
        Channel::Rf => {
            let q = flipped_nucleus(reg, i, j)?;
            drive.kappa * reg.spec.nuclei[q - 1].effective_coupling_mhz() * drive.power.sqrt()
        }
    })
}

/// Population of level `i` versus drive time, starting from pure |i⟩.
pub fn rabi_simulate(
    reg: &Register,
    drive: &Drive,
    channel: Channel,
    target: (usize, usize),
    times_us: &[f64],
) -> Result<DecayCurve> {
    let omega = rabi_frequency(reg, channel, target, drive)?;
    let start = RegisterState::initial(reg, InitialState::Pure(reg.labels[target.0]))?;
    let signal = times_us
        .iter()
        .map(|&t| {
            let p = Pulse { duration_us: Some(t), ..Pulse::ideal(channel, target.0, target.1, omega * t, 0.0) };
            apply_pulse(reg, &start, &p).map(|s| s.rho[(target.0, target.0)].re)
        })
        .collect::<Result<Vec<f64>>>()?;
    DecayCurve::new(times_us.to_vec(), signal, None)
}

fn nuclear_bit(reg: &Register, q: usize) -> usize {
    1 << (reg.n_nuclei() - q)
}

fn check_nucleus(reg: &Register, q: usize) -> Result<()> {
    if q == 0 || q > reg.n_nuclei() {
        return Err(Error::validation(format!("nuclear qubit {q} does not exist (1..={})", reg.n_nuclei())));
    }
    Ok(())
}

/// π(MW)–π(RF)–π(MW) on nucleus `q` from the ideal initial state; returns
/// the sequence and the level that should end fully populated.
pub fn endor_sequence(reg: &Register, q: usize) -> Result<(PulseSequence, Label)> {
    check_nucleus(reg, q)?;
    let g = reg.index_of(Label::new(0, 0))?;
    let e = reg.index_of(Label::new(-1, 0))?;
    let flipped = Label::new(-1, nuclear_bit(reg, q));
    let f = reg.index_of(flipped)?;
    let seq = PulseSequence::new()
        .pulse(Pulse::ideal(Channel::Mw, g, e, PI, 0.0))
        .pulse(Pulse::ideal(Channel::Rf, e, f, PI, 0.0).with_control(0, 1))
        .pulse(Pulse::ideal(Channel::Mw, g, e, PI, 0.0));
    Ok((seq, flipped))
}

/// π/2 – τ – π – τ – π/2 on one transition.
pub fn hahn_echo_sequence(channel: Channel, (i, j): (usize, usize), tau_us: f64) -> PulseSequence {
    PulseSequence::new()
        .pulse(Pulse::ideal(channel, i, j, FRAC_PI_2, 0.0))
        .wait(tau_us)
        .pulse(Pulse::ideal(channel, i, j, PI, 0.0))
        .wait(tau_us)
        .pulse(Pulse::ideal(channel, i, j, FRAC_PI_2, 0.0))
}

/// SWAP of the electron qubit and nucleus `q` as three selective-π CNOTs,
/// repeated for every spectator-nucleus configuration.
pub fn swap_sequence(reg: &Register, q: usize) -> Result<PulseSequence> {
    check_nucleus(reg, q)?;
    let bit = nuclear_bit(reg, q);
    let n = reg.n_nuclei();
    let spectators: Vec<usize> = (0..1usize << n).filter(|b| b & bit == 0).collect();
    let mut cnot_en = PulseSequence::new();
    let mut cnot_ne = PulseSequence::new();
    for &b in &spectators {
        let (lo, hi) = (reg.index_of(Label::new(-1, b))?, reg.index_of(Label::new(-1, b | bit))?);
        cnot_en = cnot_en.pulse(Pulse::ideal(Channel::Rf, lo, hi, PI, 0.0).with_control(0, 1));
        let (g, e) = (reg.index_of(Label::new(0, b | bit))?, reg.index_of(Label::new(-1, b | bit))?);
        cnot_ne = cnot_ne.pulse(Pulse::ideal(Channel::Mw, g, e, PI, 0.0).with_control(q, 1));
    }
    Ok(cnot_en.clone().then(&cnot_ne).then(&cnot_en))
}

/// Polarization of nucleus `q` after a SWAP from m_s = 0 with mixed nuclei,
/// divided by the initial electron polarization (1).
pub fn swap_transfer_efficiency(reg: &Register, q: usize) -> Result<f64> {
    let seq = swap_sequence(reg, q)?;
    let s = run_sequence(reg, &seq, InitialState::MixedNuclear, &FreeEvolution::default())?;
    let n = reg.n_nuclei();
    Ok(reg.labels.iter().zip(s.populations()).map(|(l, p)| if l.qubit(q, n) == Some(0) { p } else { -p }).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellVariant {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellVariant {
    pub const ALL: [BellVariant; 4] =
        [BellVariant::PhiPlus, BellVariant::PhiMinus, BellVariant::PsiPlus, BellVariant::PsiMinus];

    pub fn name(self) -> &'static str {
        match self {
            BellVariant::PhiPlus => "phi+",
            BellVariant::PhiMinus => "phi-",
            BellVariant::PsiPlus => "psi+",
            BellVariant::PsiMinus => "psi-",
        }
    }

    pub fn is_phi(self) -> bool {
        matches!(self, BellVariant::PhiPlus | BellVariant::PhiMinus)
    }
}

impl std::str::FromStr for BellVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::validation(format!("unknown Bell variant {s:?} (phi+, phi-, psi+, psi-)")))
    }
}

fn pair_bits(reg: &Register, x1: usize, x2: usize) -> usize {
    let n = reg.n_nuclei();
    (x1 << (n - 1)) | (x2 << (n - 2))
}

fn check_pair(reg: &Register) -> Result<()> {
    if reg.n_nuclei() < 2 {
        return Err(Error::validation(format!("Bell states need 2 nuclear qubits, register has {}", reg.n_nuclei())));
    }
    Ok(())
}

/// Preparation circuit on nuclei 1 and 2 in the m_s = −1 manifold: MW π
/// into m_s = −1, an RF π/2 creating a single-quantum superposition, then a
/// conditional RF π. Spectator nuclei stay in 0.
pub fn bell_circuit(reg: &Register, variant: BellVariant) -> Result<PulseSequence> {
    check_pair(reg)?;
    let lvl = |x1, x2| reg.index_of(Label::new(-1, pair_bits(reg, x1, x2)));
    let g = reg.index_of(Label::new(0, 0))?;
    let mut seq = PulseSequence::new().pulse(Pulse::ideal(Channel::Mw, g, lvl(0, 0)?, PI, 0.0));
    let phase = match variant {
        BellVariant::PhiPlus | BellVariant::PsiPlus => FRAC_PI_2,
        BellVariant::PhiMinus | BellVariant::PsiMinus => -FRAC_PI_2,
    };
    seq = if variant.is_phi() {
        seq.pulse(Pulse::ideal(Channel::Rf, lvl(0, 0)?, lvl(1, 0)?, FRAC_PI_2, phase).with_control(2, 0))
            .pulse(Pulse::ideal(Channel::Rf, lvl(1, 0)?, lvl(1, 1)?, PI, FRAC_PI_2).with_control(1, 1))
    } else {
        seq.pulse(Pulse::ideal(Channel::Rf, lvl(0, 0)?, lvl(0, 1)?, FRAC_PI_2, phase).with_control(1, 0))
            .pulse(Pulse::ideal(Channel::Rf, lvl(0, 0)?, lvl(1, 0)?, PI, FRAC_PI_2).with_control(2, 0))
    };
    Ok(seq)
}

/// Target Bell vector in the register eigenbasis (m_s = −1 manifold).
pub fn bell_target(reg: &Register, variant: BellVariant) -> Result<DVector<Complex64>> {
    check_pair(reg)?;
    let lvl = |x1, x2| reg.index_of(Label::new(-1, pair_bits(reg, x1, x2)));
    let ((a, b), sign) = match variant {
        BellVariant::PhiPlus => ((lvl(0, 0)?, lvl(1, 1)?), 1.0),
        BellVariant::PhiMinus => ((lvl(0, 0)?, lvl(1, 1)?), -1.0),
        BellVariant::PsiPlus => ((lvl(0, 1)?, lvl(1, 0)?), 1.0),
        BellVariant::PsiMinus => ((lvl(0, 1)?, lvl(1, 0)?), -1.0),
    };
    let mut v = DVector::zeros(reg.dimension());
    v[a] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    v[b] = Complex64::new(sign * FRAC_1_SQRT_2, 0.0);
    Ok(v)
}

/// Prepares `variant` from the ideal initial state and returns ⟨ψ|ρ|ψ⟩.
pub fn bell_prepare_and_fidelity(reg: &Register, variant: BellVariant) -> Result<f64> {
    let seq = bell_circuit(reg, variant)?;
    let s = run_sequence(reg, &seq, InitialState::ideal(), &FreeEvolution::default())?;
    Ok(s.fidelity(&bell_target(reg, variant)?))
}

/// Fidelity of a freshly prepared Bell state after free evolution under
/// `model` for each time in `times_us`.
pub fn bell_fidelity_under_detuning(
    reg: &Register,
    variant: BellVariant,
    model: &FreeEvolution,
    times_us: &[f64],
) -> Result<Vec<f64>> {
    let seq = bell_circuit(reg, variant)?;
    let prepared = run_sequence(reg, &seq, InitialState::ideal(), &FreeEvolution::default())?;
    let target = bell_target(reg, variant)?;
    times_us.iter().map(|&t| free_evolve(reg, &prepared, model, t).map(|s| s.fidelity(&target))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::{HyperfineTensor, SpinSystemSpec};

    fn register2() -> Register {
        Register::new(SpinSystemSpec::with_nuclei(vec![
            HyperfineTensor::first_shell(0),
            HyperfineTensor::third_shell(),
        ]))
        .unwrap()
    }

    #[test]
    fn bell_fidelities() {
        let reg = register2();
        for v in BellVariant::ALL {
            let f = bell_prepare_and_fidelity(&reg, v).unwrap();
            assert!(f >= 1.0 - 1e-10, "{v:?} {f}");
        }
        let one = Register::new(SpinSystemSpec::first_shell(1)).unwrap();
        assert!(bell_prepare_and_fidelity(&one, BellVariant::PhiPlus).is_err());
    }

    #[test]
    fn dephasing_dichotomy() {
        let reg = register2();
        let model = FreeEvolution::uniform(2, 0.3);
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
        let psi = bell_fidelity_under_detuning(&reg, BellVariant::PsiMinus, &model, &t).unwrap();
        assert!(psi.iter().all(|f| (f - 1.0).abs() < 1e-9));
        let phi = bell_fidelity_under_detuning(&reg, BellVariant::PhiMinus, &model, &t).unwrap();
        for (f, &tt) in phi.iter().zip(&t) {
            // relative phase (δ₁ + δ₂)t between |00⟩ and |11⟩
            assert!((f - (0.3 * tt).cos().powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn endor_and_swap_are_ideal() {
        let reg = register2();
        for q in 1..=2 {
            let (seq, target) = endor_sequence(&reg, q).unwrap();
            let s = run_sequence(&reg, &seq, InitialState::ideal(), &FreeEvolution::default()).unwrap();
            assert!((s.population(&reg, target).unwrap() - 1.0).abs() < 1e-12);
            assert!((swap_transfer_efficiency(&reg, q).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(endor_sequence(&reg, 3).is_err());
    }

    #[test]
    fn echo_revives() {
        let reg = register2();
        let (a, b) = (reg.index_of(Label::new(-1, 0)).unwrap(), reg.index_of(Label::new(-1, 1)).unwrap());
        let model = FreeEvolution { nuclear_detunings: vec![0.1, 0.37], static_phases: true, ..Default::default() };
        for tau in [0.0, 1.0, 13.7] {
            let s = run_sequence(
                &reg,
                &hahn_echo_sequence(Channel::Rf, (a, b), tau),
                InitialState::Pure(reg.labels[a]),
                &model,
            )
            .unwrap();
            assert!((s.rho[(a, a)].re - 1.0).abs() < 1e-9, "{tau}");
        }
    }

    #[test]
    fn rabi_contrast_and_enhancement() {
        let reg = Register::new(SpinSystemSpec::first_shell(1)).unwrap();
        let (a, b) = (reg.index_of(Label::new(-1, 0)).unwrap(), reg.index_of(Label::new(-1, 1)).unwrap());
        let drive = Drive::new(4.0);
        let omega = rabi_frequency(&reg, Channel::Rf, (a, b), &drive).unwrap();
        let t: Vec<f64> = (0..200).map(|k| k as f64 * 0.05 * PI / omega).collect();
        let c = rabi_simulate(&reg, &drive, Channel::Rf, (a, b), &t).unwrap();
        assert_eq!(c.signal[0], 1.0);
        let lo = c.signal.iter().copied().fold(1.0, f64::min);
        assert!(lo.abs() < 1e-12);
        let weak =
            Register::new(SpinSystemSpec::with_nuclei(vec![HyperfineTensor::first_shell(0).scaled(0.1)])).unwrap();
        let (wa, wb) = (weak.index_of(Label::new(-1, 0)).unwrap(), weak.index_of(Label::new(-1, 1)).unwrap());
        let w100 = rabi_frequency(&weak, Channel::Rf, (wa, wb), &Drive::new(400.0)).unwrap();
        assert!((w100 / omega - 1.0).abs() < 0.02, "{}", w100 / omega);
    }
}
