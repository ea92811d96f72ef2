use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_edge::ao::{alternating_optimize, AoOptions, Scenario};
use ris_edge::beamforming::{all_beamformers, BeamformerSet};
use ris_edge::channel::{complex_gaussian, effective_channels, PhaseVector};
use ris_edge::learning::{
    error_at_sinr, rate, rate_target, sample_count, SystemConfig, TaskProfile, DEFAULT_POWER_WATTS,
};
use ris_edge::numerics::{hermitian_eig, ComplexMat, ComplexVec};
use ris_edge::phase_opt::{
    chi_prime, els_search, q_update, theta_update, ElsOptions, QProjector, QcqpData, ReflectionCoefficients,
};

fn complex_vec(m: usize, rng: &mut ChaCha8Rng) -> ComplexVec {
    ComplexVec::from_fn(m, |_, _| complex_gaussian(rng))
}

fn hermitian(m: usize, rng: &mut ChaCha8Rng) -> ComplexMat {
    let x = ComplexMat::from_fn(m, m, |_, _| complex_gaussian(rng));
    (&x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

fn synthetic(m: usize, rng: &mut ChaCha8Rng) -> QcqpData {
    QcqpData {
        user: 0,
        gamma: 1.0,
        a: vec![],
        b: vec![],
        powers: vec![],
        noise: 1.0,
        a_mat: hermitian(m, rng),
        b_vec: complex_vec(m, rng),
        tau: rng.random_range(-3.0..3.0),
    }
}

fn instance(seed: u64, n: usize, m: usize, k: usize) -> (Scenario, BeamformerSet, ReflectionCoefficients) {
    let sc = Scenario::reference(n, m, k, seed);
    let ch = sc.channels().unwrap();
    let theta = PhaseVector::random(m, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
    let ws = all_beamformers(&effective_channels(&ch, &theta).unwrap(), &sc.powers(), sc.system.noise_watts).unwrap();
    let coef = ReflectionCoefficients::new(&ch, &ws, &sc.powers(), sc.system.noise_watts).unwrap();
    (sc, ws, coef)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), m in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = hermitian(m, &mut rng);
        let eig = hermitian_eig(&a).unwrap();
        prop_assert!((eig.reconstruct() - &a).norm() <= 1e-10 * (1.0 + a.norm()));
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn theta_update_unit_modulus(seed in any::<u64>(), m in 1usize..20, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<ComplexVec> = (0..k).map(|_| complex_vec(m, &mut rng)).collect();
        let u: Vec<ComplexVec> = (0..k).map(|_| complex_vec(m, &mut rng)).collect();
        let theta = theta_update(&q, &u);
        prop_assert!(theta.as_vec().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn qcqp_matches_sinr(seed in 0u64..10_000, scale in 0.2f64..3.0) {
        let (_, _, coef) = instance(seed, 3, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = PhaseVector::random(6, &mut rng);
        let raw = coef.sinrs(theta.as_vec());
        let gammas: Vec<f64> = raw.iter().map(|s| s * scale).collect();
        for d in coef.qcqp(&gammas).unwrap() {
            let k = d.user;
            let v = d.constraint_value(theta.as_vec());
            let margin = (raw[k] - gammas[k]).abs() / gammas[k];
            if margin > 1e-9 {
                prop_assert_eq!(v <= 0.0, raw[k] >= gammas[k]);
            }
        }
    }

    #[test]
    fn chi_decreasing_on_interior(seed in any::<u64>(), m in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = synthetic(m, &mut rng);
        let proj = QProjector::new(&d).unwrap();
        let zeta = complex_vec(m, &mut rng);
        let (zt, bt, _) = proj.transformed(&zeta);
        let top = proj.mu_upper().unwrap_or(100.0);
        for i in 0..200 {
            let mu = top * i as f64 / 200.0;
            prop_assert!(chi_prime(mu, proj.eigenvalues(), &zt, &bt).unwrap() <= 0.0);
        }
    }

    #[test]
    fn q_update_is_closest_feasible_point(seed in any::<u64>(), m in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = synthetic(m, &mut rng);
        let zeta = complex_vec(m, &mut rng);
        let Ok(q) = q_update(&zeta, &d) else { return Ok(()) };
        let scale = 1.0 + d.tau.abs();
        prop_assert!(d.constraint_value(&q) <= 1e-9 * scale);
        let best = (&q - &zeta).norm();
        // Rejection sampler: perturb ζ and q at many radii, keep feasible draws.
        let mut kept = 0;
        let mut tries = 0;
        while kept < 1000 && tries < 20_000 {
            tries += 1;
            let base = if tries % 2 == 0 { &zeta } else { &q };
            let r = 10f64.powf(rng.random_range(-3.0..1.0));
            let cand = base + complex_vec(m, &mut rng) * Complex64::new(r, 0.0);
            if d.constraint_value(&cand) <= 0.0 {
                kept += 1;
                prop_assert!(best <= (&cand - &zeta).norm() + 1e-6);
            }
        }
    }

    #[test]
    fn samples_and_error_consistent(s in 1e-6f64..1e6, task_index in 0usize..4) {
        let cfg = SystemConfig::reference(1, 1, 1);
        let task = &TaskProfile::reference_set(DEFAULT_POWER_WATTS)[task_index];
        let v = sample_count(rate(s), &cfg, task.bits).unwrap();
        let e = error_at_sinr(s, task, &cfg);
        prop_assert!((e - task.c * v.powf(-task.d)).abs() <= 1e-12 * e);
        let r = rate_target(e, task, &cfg).unwrap();
        prop_assert!((r - rate(s)).abs() <= 1e-9 * rate(s));
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = format!("{x}");
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ao_trace_never_increases(seed in 0u64..1000) {
        let sol = alternating_optimize(&Scenario::reference(4, 12, 3, seed), &AoOptions::default()).unwrap();
        for w in sol.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-9);
        }
    }

    #[test]
    fn els_labels_monotone(seed in 0u64..1000) {
        let (sc, ws, _) = instance(seed, 4, 12, 3);
        let ch = sc.channels().unwrap();
        let res = els_search(&ch, &ws, &sc.tasks, &sc.system, &PhaseVector::ones(12), &ElsOptions::default()).unwrap();
        let worst_infeasible = res.trace.iter().filter(|s| !s.feasible).map(|s| s.delta).fold(0.0, f64::max);
        let best_feasible = res.trace.iter().filter(|s| s.feasible).map(|s| s.delta).fold(f64::INFINITY, f64::min);
        prop_assert!(worst_infeasible < res.delta);
        prop_assert!(res.delta <= best_feasible);
    }
}
