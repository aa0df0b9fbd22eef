//! The Cholesky wrapper against naive dense elimination, and the jitter
//! escalation policy.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdgp::linalg::{cholesky_spd, dot, BASE_JITTER_REL, MAX_JITTER_REL};
use rdgp::Error;

/// Random SPD matrix `GᵀG + d·I` as both a faer matrix and nested rows.
fn random_spd(rng: &mut ChaCha8Rng, n: usize, diag: f64) -> (faer::Mat<f64>, Vec<Vec<f64>>) {
    let g: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..n).map(|k| g[k][i] * g[k][j]).sum::<f64>() + if i == j { diag } else { 0.0 };
        }
    }
    let m = faer::Mat::from_fn(n, n, |i, j| a[i][j]);
    (m, a)
}

#[test]
fn solve_and_logdet_match_naive_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let (m, a) = random_spd(&mut rng, n, 0.5);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let chol = cholesky_spd(&m, 1.0, 0.0).unwrap();
        assert_eq!(chol.n(), n);
        assert_eq!(chol.jitter(), 0.0);

        let got = chol.solve(&b);
        let want = common::solve(&a, &b);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
        assert!((chol.logdet() - common::log_det(&a)).abs() <= 1e-9);

        let quad = chol.inv_quad_form(&b);
        let want_quad = common::dot(&b, &want);
        assert!((quad - want_quad).abs() <= 1e-9 * want_quad.abs().max(1.0));
        assert!(quad >= 0.0);
    }
}

#[test]
fn triangular_half_solves_compose_to_the_full_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 8;
    let (m, _) = random_spd(&mut rng, n, 0.3);
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let chol = cholesky_spd(&m, 1.0, 0.0).unwrap();

    // A⁻¹b = L⁻ᵀ(L⁻¹b).
    let half = chol.solve_lower(&b);
    let full = chol.solve_lower_transpose(&half);
    let direct = chol.solve(&b);
    for (f, d) in full.iter().zip(&direct) {
        assert!((f - d).abs() <= 1e-10 * d.abs().max(1.0));
    }
    // ‖L⁻¹b‖² is the quadratic form.
    let norm2: f64 = half.iter().map(|z| z * z).sum();
    assert!((norm2 - chol.inv_quad_form(&b)).abs() <= 1e-12 * norm2.max(1.0));
}

#[test]
fn solve_mat_agrees_with_columnwise_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 6;
    let (m, _) = random_spd(&mut rng, n, 0.4);
    let chol = cholesky_spd(&m, 1.0, 0.0).unwrap();
    let b = faer::Mat::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let x = chol.solve_mat(&b);
    for c in 0..3 {
        let col: Vec<f64> = (0..n).map(|i| b[(i, c)]).collect();
        let want = chol.solve(&col);
        for i in 0..n {
            assert!((x[(i, c)] - want[i]).abs() <= 1e-12 * want[i].abs().max(1.0));
        }
    }
}

#[test]
fn singular_matrix_is_rescued_by_the_jitter_ladder() {
    // Rank-one: positive semidefinite, so the plain factorization fails and
    // the first rung that makes it definite is the base one.
    let n = 4;
    let v = [1.0, 2.0, -1.0, 0.5];
    let a = faer::Mat::from_fn(n, n, |i, j| v[i] * v[j]);
    let chol = cholesky_spd(&a, 1.0, 0.0).unwrap();
    assert!(chol.jitter() >= BASE_JITTER_REL);
    assert!(chol.jitter() <= MAX_JITTER_REL);
    // (A + jI) x = b must hold for the reported jitter.
    let b = [1.0, 0.0, 0.0, 1.0];
    let x = chol.solve(&b);
    for i in 0..n {
        let ax: f64 = (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>() + chol.jitter() * x[i];
        assert!((ax - b[i]).abs() < 1e-6, "row {i}: {ax} vs {}", b[i]);
    }
}

#[test]
fn zero_scale_disables_the_rescue() {
    let n = 3;
    let v = [1.0, 1.0, 1.0];
    let a = faer::Mat::from_fn(n, n, |i, j| v[i] * v[j]);
    match cholesky_spd(&a, 0.0, 0.0) {
        Err(Error::FactorizationFailure { n: 3, .. }) => {}
        Err(e) => panic!("expected factorization failure, got {e}"),
        Ok(_) => panic!("expected factorization failure, got a factor"),
    }
}

#[test]
fn already_jittered_rungs_are_skipped() {
    // Raw eigenvalues (2, 1, −5e−7), pre-jittered by 1e−7: rungs at or
    // below the baked-in jitter cannot help and must be skipped; the first
    // useful rung is 1e−6, and the reported jitter is the total.
    let pre = 1e-7;
    let raw = [2.0, 1.0, -5e-7];
    let a = faer::Mat::from_fn(3, 3, |i, j| if i == j { raw[i] + pre } else { 0.0 });
    let chol = cholesky_spd(&a, 1.0, pre).unwrap();
    assert!(chol.jitter() > pre);
    assert!((chol.jitter() - 1e-6).abs() < 1e-12, "jitter {}", chol.jitter());

    // The factored matrix is the raw one plus the reported total jitter.
    let x = chol.solve(&[1.0, 1.0, 1.0]);
    for i in 0..3 {
        let want = 1.0 / (raw[i] + chol.jitter());
        assert!((x[i] - want).abs() <= 1e-9 * want.abs(), "{} vs {want}", x[i]);
    }
    assert!(chol.jitter() <= MAX_JITTER_REL);
}

#[test]
fn dot_is_the_plain_inner_product() {
    assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, -5.0, 6.0]), 1.0 * 4.0 - 2.0 * 5.0 + 3.0 * 6.0);
    assert_eq!(dot(&[], &[]), 0.0);
}
