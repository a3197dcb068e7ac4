use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use spinbath_core::pulses::{
    bell_fidelity_under_detuning, run_sequence, run_sequence_from, BellVariant, Channel, FreeEvolution, InitialState,
    Label, Pulse, PulseSequence, Register, RegisterState,
};
use spinbath_core::spinsys::{HyperfineTensor, SpinSystemSpec};

fn register() -> &'static Register {
    static REG: OnceLock<Register> = OnceLock::new();
    REG.get_or_init(|| {
        Register::new(SpinSystemSpec::with_nuclei(vec![
            HyperfineTensor::first_shell(0),
            HyperfineTensor::third_shell(),
        ]))
        .unwrap()
    })
}

/// Every drivable transition of the register.
fn transitions() -> Vec<(Channel, usize, usize)> {
    let reg = register();
    let d = reg.dimension();
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            for ch in [Channel::Mw, Channel::Rf] {
                if reg.check_transition(ch, i, j).is_ok() {
                    out.push((ch, i, j));
                }
            }
        }
    }
    out
}

fn sequence() -> impl Strategy<Value = PulseSequence> {
    let n = transitions().len();
    let step = prop_oneof![
        (0..n, -2.0 * PI..2.0 * PI, -PI..PI, prop::option::of(0.1..5.0f64)).prop_map(|(k, angle, phase, dur)| {
            let (ch, i, j) = transitions()[k];
            Some(Pulse { duration_us: dur, ..Pulse::ideal(ch, i, j, angle, phase) })
        }),
        (0.0..10.0f64).prop_map(|_| None),
    ];
    (prop::collection::vec(step, 1..8), prop::collection::vec(0.0..10.0f64, 8)).prop_map(|(steps, waits)| {
        let mut seq = PulseSequence::new();
        for (s, w) in steps.into_iter().zip(waits) {
            seq = match s {
                Some(p) => seq.pulse(p),
                None => seq.wait(w),
            };
        }
        seq
    })
}

fn evolution() -> impl Strategy<Value = FreeEvolution> {
    (-1.0..1.0f64, -1.0..1.0f64, -0.5..0.5f64, any::<bool>()).prop_map(|(a, b, e, st)| FreeEvolution {
        nuclear_detunings: vec![a, b],
        electron_detuning: e,
        static_phases: st,
    })
}

fn init() -> impl Strategy<Value = InitialState> {
    prop_oneof![
        Just(InitialState::MixedNuclear),
        (prop::sample::select(vec![-1i8, 0, 1]), 0usize..4).prop_map(|(ms, b)| InitialState::Pure(Label::new(ms, b))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_preserved(seq in sequence(), ev in evolution(), start in init()) {
        let s = run_sequence(register(), &seq, start, &ev).unwrap();
        prop_assert!((s.trace() - 1.0).abs() <= 1e-10);
        prop_assert!(s.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn purity_conserved(seq in sequence(), ev in evolution(), ms in prop::sample::select(vec![-1i8, 0, 1]), b in 0usize..4) {
        let s = run_sequence(register(), &seq, InitialState::Pure(Label::new(ms, b)), &ev).unwrap();
        prop_assert!((s.purity() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn composition(a in sequence(), b in sequence(), ev in evolution(), start in init()) {
        let reg = register();
        let joined = run_sequence(reg, &a.clone().then(&b), start, &ev).unwrap();
        let mid: RegisterState = run_sequence(reg, &a, start, &ev).unwrap();
        let stepwise = run_sequence_from(reg, &b, &mid, &ev).unwrap();
        prop_assert_eq!(joined, stepwise);
    }

    #[test]
    fn bell_dephasing_dichotomy(delta in 0.05..2.0f64) {
        let reg = register();
        let ev = FreeEvolution::uniform(2, delta);
        let times: Vec<f64> = (0..25).map(|k| k as f64 * 0.2).collect();
        for v in BellVariant::ALL {
            let f = bell_fidelity_under_detuning(reg, v, &ev, &times).unwrap();
            if v.is_phi() {
                let spread = f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
                prop_assert!(spread > 1e-3, "{:?} {spread}", v);
            } else {
                prop_assert!(f.iter().all(|x| (x - f[0]).abs() <= 1e-9), "{:?}", v);
            }
        }
    }
}
