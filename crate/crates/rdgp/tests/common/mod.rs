//! Naive reference implementations shared by the integration tests.
//!
//! Everything here is deliberately elementary — textbook Gaussian
//! elimination with partial pivoting, direct formula evaluation, no code
//! shared with the crate's linear algebra — so the production Cholesky
//! paths are checked against an independent computation rather than
//! against themselves.
#![allow(dead_code)]

use rdgp::kernel::{KernelParams, MeanBasis};
use rdgp::model::RddDataset;

/// Mirrors the construction-time diagonal jitter the production Gram
/// builder always adds (`rdgp::linalg::BASE_JITTER_REL`).
pub const BASE_JITTER_REL: f64 = 1e-8;

pub const LN_2PI: f64 = 1.8378770664093453;

pub fn se(xi: f64, xj: f64, k: &KernelParams) -> f64 {
    let d = xi - xj;
    k.variance * (-d * d / (2.0 * k.lengthscale * k.lengthscale)).exp()
}

/// Dense SE Gram matrix as nested rows, with the production base jitter on
/// the diagonal and the noise variance added when `add_noise` is set.
pub fn se_gram(xs: &[f64], k: &KernelParams, add_noise: bool) -> Vec<Vec<f64>> {
    let n = xs.len();
    let extra = BASE_JITTER_REL * k.variance + if add_noise { k.noise } else { 0.0 };
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = se(xs[i], xs[j], k);
        }
        a[i][i] += extra;
    }
    a
}

/// Solve `A z = b` by Gaussian elimination with partial pivoting.
///
/// Panics on a numerically singular pivot; the test matrices are SPD with
/// a noise floor, so a zero pivot indicates a broken test fixture.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        assert!(m[pivot][col] != 0.0, "singular system in naive solve");
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * z[k]).sum();
        z[row] = (rhs[row] - s) / m[row][row];
    }
    z
}

/// `log |A|` via LU with partial pivoting; panics unless the determinant
/// is positive (every matrix built here is SPD).
pub fn log_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut swaps = 0usize;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if pivot != col {
            m.swap(col, pivot);
            swaps += 1;
        }
        assert!(m[col][col] != 0.0, "singular system in naive log_det");
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
    let neg_pivots = (0..n).filter(|&i| m[i][i] < 0.0).count();
    let det_sign = sign * if neg_pivots % 2 == 0 { 1.0 } else { -1.0 };
    assert!(det_sign > 0.0, "non-positive determinant in naive log_det");
    (0..n).map(|i| m[i][i].abs().ln()).sum()
}

/// Textbook GP conditional `(mean, variance)` at `x_star` with an explicit
/// polynomial mean, via the naive dense solve.
pub fn gp_conditional_naive(
    xs: &[f64],
    ys: &[f64],
    mean_fn: &MeanBasis,
    k: &KernelParams,
    x_star: f64,
) -> (f64, f64) {
    let a = se_gram(xs, k, true);
    let r: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - mean_fn.value(x)).collect();
    let kstar: Vec<f64> = xs.iter().map(|&x| se(x, x_star, k)).collect();
    let alpha = solve(&a, &r);
    let mean = mean_fn.value(x_star) + dot(&kstar, &alpha);
    let variance = k.variance - dot(&kstar, &solve(&a, &kstar));
    (mean, variance)
}

/// Textbook marginal log-likelihood via the naive dense solve.
pub fn marginal_loglik_naive(xs: &[f64], ys: &[f64], mean_fn: &MeanBasis, k: &KernelParams) -> f64 {
    let a = se_gram(xs, k, true);
    let r: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - mean_fn.value(x)).collect();
    let quad = dot(&r, &solve(&a, &r));
    -0.5 * (quad + log_det(&a) + xs.len() as f64 * LN_2PI)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dataset(xs: &[f64], ys: &[f64], b: f64) -> RddDataset {
    RddDataset::new(xs.to_vec(), ys.to_vec(), b).expect("valid test dataset")
}

/// The 12-point single-arm fixture shared by the collapsed-sampler and
/// gradient tests: x sorted uniform on (−1, 0), y a gentle trend plus
/// noise, frozen at full precision.
pub const FIX12_X: [f64; 12] = [
    -0.9947346954344253,
    -0.7747928100094081,
    -0.7215743878992267,
    -0.6998337150887746,
    -0.6969675731806865,
    -0.5320650471562792,
    -0.37490453339533303,
    -0.22431430975480648,
    -0.20293057124795377,
    -0.17877158161723372,
    -0.1264465546037381,
    -0.10278619903042452,
];

pub const FIX12_Y: [f64; 12] = [
    -0.2973052515289377,
    -0.23263067780126598,
    -0.18880892393709295,
    -0.15510090965783163,
    -0.25747583195317014,
    -0.24111342527956273,
    -0.28583049373544117,
    -0.12408514011122923,
    -0.12429067701198887,
    -0.010670656347794467,
    0.017280946257153443,
    0.1330134145873932,
];
