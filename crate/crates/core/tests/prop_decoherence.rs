use proptest::prelude::*;
use spinbath_core::decoherence::{
    bath_fid_simulate, bell_t2star_from_sq, echo_model, fid_model, fit_decay, fit_t2_scaling, CoherenceKind,
    DecayCurve, FitOptions, GaussianCouplings, ModelKind, ScalingSpace,
};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_fid_recovered(t2 in 2.0..40.0f64, dw in 0.2..2.0f64, amp in 0.2..2.0f64, off in -0.5..0.5f64) {
        let times: Vec<f64> = (0..160).map(|k| k as f64 * 2.5 * t2 / 160.0).collect();
        let y = times.iter().map(|&t| fid_model(t, t2, dw, amp, off)).collect();
        let fit = fit_decay(&DecayCurve::new(times, y, None).unwrap(), ModelKind::GaussianFid, &FitOptions::default()).unwrap();
        prop_assert!(rel(fit.t_us, t2) < 1e-6, "{}", fit.t_us);
        prop_assert!(rel(fit.delta_omega.unwrap(), dw) < 1e-6);
        prop_assert!(rel(fit.amplitude, amp) < 1e-6);
        prop_assert!((fit.offset - off).abs() < 1e-6 * off.abs().max(amp));
    }

    #[test]
    fn noiseless_echo_recovered(t2 in 50.0..5000.0f64, amp in 0.2..2.0f64, off in -0.5..0.5f64) {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 2.0 * t2 / 100.0).collect();
        let y = times.iter().map(|&t| echo_model(t, t2, amp, off)).collect();
        let fit = fit_decay(&DecayCurve::new(times, y, None).unwrap(), ModelKind::CubicEcho, &FitOptions::default()).unwrap();
        prop_assert!(rel(fit.t_us, t2) < 1e-6);
        prop_assert!(rel(fit.amplitude, amp) < 1e-6);
        prop_assert!((fit.offset - off).abs() < 1e-6 * off.abs().max(amp));
    }

    #[test]
    fn combination_algebra(t1 in 1.0..100.0f64, t2 in 1.0..100.0f64) {
        prop_assume!((t1 - t2).abs() > 1e-6);
        let b = bell_t2star_from_sq(t1, t2).unwrap();
        let psi = b.psi.value().unwrap();
        // 1/T_phi ± 1/T_psi = 2/T for the faster and the slower single-quantum time
        let fast = t1.min(t2);
        let slow = t1.max(t2);
        prop_assert!(rel(1.0 / b.phi + 1.0 / psi, 2.0 / fast) < 1e-12);
        prop_assert!(rel(1.0 / b.phi - 1.0 / psi, 2.0 / slow) < 1e-12);
    }

    #[test]
    fn bath_envelope_starts_at_one(s1 in 0.0..3.0f64, s2 in 0.0..3.0f64, rho in -1.0..1.0f64, seed in any::<u64>(), samples in 100usize..400) {
        let src = GaussianCouplings::new(s1, s2, rho, seed).unwrap();
        for kind in CoherenceKind::ALL {
            let c = bath_fid_simulate(&src, kind, &[0.0, 1.0], samples).unwrap();
            prop_assert!((c.signal[0] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaling_fit_is_linear_in_t2(pts in prop::collection::vec((1e-4..0.5f64, 1.0..1e4f64), 2..8)) {
        for space in [ScalingSpace::Log, ScalingSpace::Linear] {
            let a = fit_t2_scaling(&pts, space).unwrap();
            let doubled: Vec<(f64, f64)> = pts.iter().map(|&(n, t)| (n, 2.0 * t)).collect();
            let b = fit_t2_scaling(&doubled, space).unwrap();
            prop_assert!(rel(b.coefficient, 2.0 * a.coefficient) < 1e-13);
        }
    }
}

/// With Gaussian noise of known σ the reported 1σ should cover the truth
/// about 68% of the time.
#[test]
fn reported_sigmas_are_calibrated() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let truth = [13.3, 0.5, 1.0, 0.0];
    let times: Vec<f64> = (0..200).map(|k| 3.0 * truth[0] * k as f64 / 199.0).collect();
    let normal = Normal::new(0.0, 0.01).unwrap();
    let (mut hits, mut trials) = (0, 0);
    for seed in 0..200u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y = times
            .iter()
            .map(|&t| fid_model(t, truth[0], truth[1], truth[2], truth[3]) + normal.sample(&mut rng))
            .collect();
        let curve = DecayCurve::new(times.clone(), y, Some(vec![0.01; times.len()])).unwrap();
        let f = fit_decay(&curve, ModelKind::GaussianFid, &FitOptions::default()).unwrap();
        for ((p, s), t) in f.parameters().iter().zip(f.uncertainties()).zip(truth) {
            hits += usize::from((p - t).abs() <= s);
            trials += 1;
        }
    }
    let coverage = hits as f64 / trials as f64;
    // 800 trials, binomial sd about 1.6%; the four parameters are correlated
    assert!((0.60..=0.76).contains(&coverage), "{coverage}");
}
