//! Cholesky factorization of symmetric positive-definite systems with an
//! escalating diagonal-jitter fallback.
//!
//! Kernel matrices are positive definite in exact arithmetic but often
//! numerically singular (near-duplicate inputs, tiny noise). Every solve in
//! this crate goes through [`cholesky_spd`], which retries with diagonal
//! jitter `1e−8·s, 1e−7·s, …, 1e−2·s` (for a caller-supplied scale `s`,
//! usually the kernel variance) before giving up. Matrix inverses are never
//! formed explicitly; solves use the triangular factor.

use faer::linalg::solvers::{Llt, Solve};

use crate::error::{Error, Result};

/// First jitter rung, relative to the caller's scale.
pub const BASE_JITTER_REL: f64 = 1e-8;
/// Last jitter rung tried before reporting failure, relative to the scale.
pub const MAX_JITTER_REL: f64 = 1e-2;

/// A Cholesky factorization `A + jitter·I = L Lᵀ`.
pub struct Chol {
    llt: Llt<f64>,
    n: usize,
    jitter: f64,
}

/// Factor `a + (jitter − already_jittered)·I`, escalating jitter until the
/// factorization succeeds.
///
/// `already_jittered` is the jitter the caller has baked into `a`'s diagonal
/// (Gram builders add `BASE_JITTER_REL·σ²` up front); pass `0.0` for a raw
/// matrix. The first attempt adds nothing. `scale` sets the jitter rungs and
/// should reflect the diagonal's magnitude.
///
/// # Errors
/// [`Error::FactorizationFailure`] if the matrix is not positive definite
/// even at `MAX_JITTER_REL·scale`.
pub fn cholesky_spd(a: &faer::Mat<f64>, scale: f64, already_jittered: f64) -> Result<Chol> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if let Ok(llt) = a.llt(faer::Side::Lower) {
        return Ok(Chol {
            llt,
            n,
            jitter: already_jittered,
        });
    }
    let mut rel = BASE_JITTER_REL;
    let mut last = already_jittered;
    while rel <= MAX_JITTER_REL * (1.0 + 1e-12) {
        let jitter = rel * scale;
        if jitter > already_jittered {
            last = jitter;
            let mut b = a.clone();
            for i in 0..n {
                b[(i, i)] += jitter - already_jittered;
            }
            if let Ok(llt) = b.llt(faer::Side::Lower) {
                return Ok(Chol { llt, n, jitter });
            }
        }
        rel *= 10.0;
    }
    Err(Error::FactorizationFailure {
        n,
        last_jitter: last,
    })
}

impl Chol {
    /// Dimension of the factored system.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total diagonal jitter present in the factored matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `log det(A + jitter·I)`, from the factor's diagonal.
    pub fn logdet(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..self.n).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let rhs = faer::Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solve `A X = B` column-wise for a skinny right-hand side.
    pub fn solve_mat(&self, b: &faer::Mat<f64>) -> faer::Mat<f64> {
        debug_assert_eq!(b.nrows(), self.n);
        self.llt.solve(b)
    }

    /// Solve the triangular half `L z = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut z = faer::Mat::from_fn(self.n, 1, |i, _| b[i]);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(
            self.llt.L(),
            z.as_mut(),
            faer::Par::Seq,
        );
        (0..self.n).map(|i| z[(i, 0)]).collect()
    }

    /// Quadratic form `bᵀ A⁻¹ b = ‖L⁻¹b‖²` (always ≥ 0).
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        self.solve_lower(b).iter().map(|z| z * z).sum()
    }

    /// Solve `Lᵀ z = b`. For `z = L⁻ᵀ b` with `b ~ N(0, I)`, `z` has
    /// covariance `A⁻¹`, which is how posterior coefficient draws are made.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut z = faer::Mat::from_fn(self.n, 1, |i, _| b[i]);
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(
            self.llt.L().transpose(),
            z.as_mut(),
            faer::Par::Seq,
        );
        (0..self.n).map(|i| z[(i, 0)]).collect()
    }
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
