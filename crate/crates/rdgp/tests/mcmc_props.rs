//! Sampler machinery: summary statistics against hand values, convergence
//! diagnostics on constructed chains, and the adaptive walker on a target
//! whose posterior is known in closed form.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdgp::mcmc::{
    ess, ess_chains, run_chain, run_chains, sample_mean, sample_quantile, sample_sd, sample_var,
    split_rhat, RHAT_THRESHOLD,
};

#[test]
fn summary_statistics_match_hand_values() {
    let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
    assert_eq!(sample_mean(&xs), 5.0);
    // Σ(x−5)² = 9+1+1+1+0+0+4+16 = 32; /7.
    assert!((sample_var(&xs) - 32.0 / 7.0).abs() < 1e-14);
    assert!((sample_sd(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-14);

    assert!(sample_mean(&[]).is_nan());
    assert_eq!(sample_var(&[3.0]), 0.0);
}

#[test]
fn quantile_uses_linear_interpolation_of_order_statistics() {
    let xs = [3.0, 1.0, 2.0, 4.0]; // sorted: 1 2 3 4
    assert_eq!(sample_quantile(&xs, 0.0), 1.0);
    assert_eq!(sample_quantile(&xs, 1.0), 4.0);
    assert_eq!(sample_quantile(&xs, 0.5), 2.5);
    // p(n−1) = 0.25·3 = 0.75 → 1 + 0.75·(2−1).
    assert_eq!(sample_quantile(&xs, 0.25), 1.75);
    assert_eq!(sample_quantile(&[7.0], 0.3), 7.0);
    assert!(sample_quantile(&[], 0.5).is_nan());
}

#[test]
#[should_panic(expected = "quantile level")]
fn quantile_rejects_out_of_range_levels() {
    sample_quantile(&[1.0, 2.0], 1.5);
}

#[test]
fn rhat_separates_mixed_from_disjoint_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..400).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let a = noise(&mut rng);
    let b = noise(&mut rng);
    let mixed = split_rhat(&[a.clone(), b.clone()]);
    assert!((mixed - 1.0).abs() < 0.05, "well-mixed R̂ = {mixed}");
    assert!(mixed <= RHAT_THRESHOLD);

    let shifted: Vec<f64> = b.iter().map(|x| x + 5.0).collect();
    let split = split_rhat(&[a, shifted]);
    assert!(split > 1.5, "disjoint R̂ = {split}");
}

#[test]
fn rhat_handles_degenerate_chains() {
    // Constant and equal: no variance anywhere, defined as converged.
    assert_eq!(split_rhat(&[vec![2.0; 50], vec![2.0; 50]]), 1.0);
    // Constant but different: zero within-variance, infinitely separated.
    assert_eq!(split_rhat(&[vec![0.0; 50], vec![1.0; 50]]), f64::INFINITY);
    // Too short to split.
    assert!(split_rhat(&[vec![1.0, 2.0, 3.0]]).is_nan());
}

#[test]
fn trending_single_chain_fails_the_split_diagnostic() {
    // Split-R̂ exists to catch a single chain whose halves disagree.
    let trend: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
    assert!(split_rhat(&[trend]) > 1.5);
}

#[test]
fn ess_is_near_n_for_white_noise_and_collapses_under_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let white: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e = ess(&white);
    assert!(e > 1200.0 && e <= 4000.0, "white-noise ESS = {e}");

    // AR(1) with φ = 0.95 has integrated autocorrelation ≈ (1+φ)/(1−φ) = 39.
    let mut x = 0.0;
    let ar: Vec<f64> = (0..2000)
        .map(|_| {
            x = 0.95 * x + rng.random_range(-1.0f64..1.0);
            x
        })
        .collect();
    let e_ar = ess(&ar);
    assert!(e_ar < 400.0, "AR(1) ESS = {e_ar}");

    assert_eq!(ess(&[1.0, 2.0]), 2.0);
    let total = ess_chains(&[white.clone(), white]);
    assert!((total - 2.0 * e).abs() < 1e-9);
}

#[test]
fn walker_recovers_a_standard_normal_target() {
    let f = |x: &[f64]| -> Option<(f64, ())> { Some((-0.5 * x[0] * x[0], ())) };
    let run = run_chains(&f, &[vec![-2.0], vec![2.0]], &[1.0], 1500, 4000, 42).unwrap();
    assert_eq!(run.kept_per_chain, 4000);
    assert_eq!(run.draws.len(), 8000);
    assert!(run.converged(), "R̂ = {:?}", run.rhat);

    let col = run.column(0);
    let e = ess_chains(&[col[..4000].to_vec(), col[4000..].to_vec()]).max(8.0);
    let mcse = 1.0 / e.sqrt();
    assert!(sample_mean(&col).abs() < 4.0 * mcse, "mean {}", sample_mean(&col));
    assert!((sample_sd(&col) - 1.0).abs() < 0.08, "sd {}", sample_sd(&col));
    let q = sample_quantile(&col, 0.975);
    assert!((q - 1.96).abs() < 0.15, "97.5% quantile {q}");

    for &rate in &run.accept_rates {
        assert!(rate > 0.1 && rate < 0.6, "acceptance {rate}");
    }
}

#[test]
fn walker_is_deterministic_in_the_seed() {
    let f = |x: &[f64]| -> Option<(f64, f64)> { Some((-0.5 * x[0] * x[0], x[0] * 2.0)) };
    let a = run_chains(&f, &[vec![0.5]], &[1.0], 200, 300, 7).unwrap();
    let b = run_chains(&f, &[vec![0.5]], &[1.0], 200, 300, 7).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.aux, b.aux);
    assert_eq!(a.accept_rates, b.accept_rates);

    let c = run_chains(&f, &[vec![0.5]], &[1.0], 200, 300, 8).unwrap();
    assert_ne!(a.draws, c.draws);
}

#[test]
fn rejected_regions_are_never_entered() {
    // Target supported on x > 0 via None: every kept draw must satisfy it.
    let f = |x: &[f64]| -> Option<(f64, ())> {
        if x[0] <= 0.0 {
            None
        } else {
            Some((-x[0], ()))
        }
    };
    let run = run_chains(&f, &[vec![1.0]], &[0.5], 300, 500, 1).unwrap();
    assert!(run.draws.iter().all(|d| d[0] > 0.0));
}

#[test]
fn zero_dimensional_targets_yield_empty_draws_with_cloned_aux() {
    let f = |_: &[f64]| -> Option<(f64, u32)> { Some((0.0, 99)) };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = run_chain(&f, &[], &[], 50, 20, &mut rng).unwrap();
    assert_eq!(out.draws.len(), 20);
    assert!(out.draws.iter().all(|d| d.is_empty()));
    assert_eq!(out.aux, vec![99; 20]);
    assert_eq!(out.accept_rate, 1.0);
}

#[test]
fn impossible_initial_points_error() {
    let f = |_: &[f64]| -> Option<(f64, ())> { None };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(run_chain(&f, &[0.0], &[1.0], 10, 10, &mut rng).is_err());

    let g = |x: &[f64]| -> Option<(f64, ())> { Some((-x[0] * x[0], ())) };
    assert!(run_chains(&g, &[], &[1.0], 10, 10, 0).is_err());
}
