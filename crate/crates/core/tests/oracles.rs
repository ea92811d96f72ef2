use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_edge::ao::{alternating_optimize, run_baseline, AoOptions, Scenario, Scheme};
use ris_edge::learning::fit_error_model;

// Log-log squared residual of (c, d) on the points.
fn loss(points: &[(f64, f64)], c: f64, d: f64) -> f64 {
    points.iter().map(|&(v, e)| (e.ln() - c.ln() + d * v.ln()).powi(2)).sum()
}

#[test]
fn noisy_fit_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let points: Vec<(f64, f64)> = (0..12)
        .map(|i| {
            let v = 50.0 * 1.6f64.powi(i);
            let noise = (rng.random::<f64>() - 0.5) * 0.2;
            (v, 7.07 * v.powf(-0.81) * noise.exp())
        })
        .collect();
    let (c, d) = fit_error_model(&points).unwrap();

    // Grid over d, best ln c in closed form for each, then refine around the winner.
    let best_c = |d: f64| {
        let n = points.len() as f64;
        (points.iter().map(|&(v, e)| e.ln() + d * v.ln()).sum::<f64>() / n).exp()
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    let mut best_d = 0.0;
    for _ in 0..6 {
        let step = (hi - lo) / 1000.0;
        best_d = (0..=1000)
            .map(|i| lo + step * i as f64)
            .min_by(|a, b| loss(&points, best_c(*a), *a).total_cmp(&loss(&points, best_c(*b), *b)))
            .unwrap();
        lo = best_d - step;
        hi = best_d + step;
    }
    assert!((d - best_d).abs() < 1e-9, "{d} vs {best_d}");
    assert!((c - best_c(best_d)).abs() < 1e-8 * c);
    assert!(loss(&points, c, d) <= loss(&points, best_c(best_d), best_d) + 1e-12);
}

#[test]
fn sum_rate_baseline_wins_on_sum_rate() {
    let opts = AoOptions::default();
    let seeds: Vec<u64> = (0..10).collect();
    let wins = seeds
        .iter()
        .filter(|&&seed| {
            let sc = Scenario::reference(4, 16, 4, seed);
            let proposed = alternating_optimize(&sc, &opts).unwrap();
            let sum_rate = run_baseline(&sc, Scheme::SumRate, &opts).unwrap();
            sum_rate.sum_rate >= proposed.sum_rate
        })
        .count();
    assert!(wins >= 9, "sum-rate scheme won on {wins}/10 seeds");
}
