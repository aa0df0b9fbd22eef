//! Squared-exponential kernel, Gram matrices, and polynomial mean bases.
//!
//! The covariance between function values at `x_i` and `x_j` is
//!
//! ```text
//! K(x_i, x_j) = σ²_GP · exp(−(x_i − x_j)² / (2ℓ²))
//! ```
//!
//! with lengthscale `ℓ` and amplitude `σ²_GP`; observations add independent
//! noise `σ²_y` on the diagonal. Mean functions are low-order polynomials
//! `m(x) = β₁ + β₂x + … + β_p x^(p−1)`, the `p = 0` case being the zero mean.
//!
//! Every Gram matrix carries a small diagonal jitter (`BASE_JITTER_REL·σ²_GP`)
//! from construction so that downstream factorizations start from a sane
//! floor; see [`crate::linalg`] for the escalation policy.

use crate::error::{Error, Result};
use crate::linalg::BASE_JITTER_REL;

/// Squared-exponential kernel parameters, all strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelParams {
    /// Lengthscale `ℓ`, in units of the running variable.
    pub lengthscale: f64,
    /// Amplitude `σ²_GP`, in squared response units.
    pub variance: f64,
    /// Observation noise `σ²_y`, in squared response units.
    pub noise: f64,
}

impl KernelParams {
    /// Construct validated parameters.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] unless all three are finite and > 0.
    pub fn new(lengthscale: f64, variance: f64, noise: f64) -> Result<Self> {
        let k = KernelParams {
            lengthscale,
            variance,
            noise,
        };
        k.validate()?;
        Ok(k)
    }

    /// Check positivity and finiteness of all three parameters.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lengthscale", self.lengthscale),
            ("variance", self.variance),
            ("noise", self.noise),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "kernel {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate the squared-exponential kernel at a pair of points.
///
/// Symmetric in its arguments; equals `σ²_GP` at zero distance.
pub fn kernel_eval(xi: f64, xj: f64, k: &KernelParams) -> f64 {
    let d = xi - xj;
    k.variance * (-d * d / (2.0 * k.lengthscale * k.lengthscale)).exp()
}

/// Dense symmetric Gram matrix over `xs`, with `(σ²_y + jitter)·I` added when
/// `add_noise` is set and the base jitter alone otherwise.
///
/// The matrix equals its transpose exactly: each off-diagonal pair is written
/// from a single kernel evaluation.
pub fn gram_matrix(xs: &[f64], k: &KernelParams, add_noise: bool) -> faer::Mat<f64> {
    let n = xs.len();
    let diag = k.variance + base_jitter(k) + if add_noise { k.noise } else { 0.0 };
    let mut m = faer::Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag;
        for j in 0..i {
            let v = kernel_eval(xs[i], xs[j], k);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// The construction-time diagonal jitter for a kernel.
pub fn base_jitter(k: &KernelParams) -> f64 {
    BASE_JITTER_REL * k.variance
}

/// Polynomial mean function `m(x) = Σ_k β_{k+1} x^k`, `k = 0..p−1`.
///
/// An empty coefficient vector is the zero mean (the "Zero Mean" model
/// variant); order `p` is the number of coefficients.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct MeanBasis {
    beta: Vec<f64>,
}

impl MeanBasis {
    /// Mean with the given coefficients `(β₁, …, β_p)`.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] if any coefficient is non-finite.
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = beta.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mean coefficient must be finite, got {bad}"
            )));
        }
        Ok(MeanBasis { beta })
    }

    /// The zero mean function (empty basis, `p = 0`).
    pub fn zero() -> Self {
        MeanBasis { beta: Vec::new() }
    }

    /// Basis order `p` (number of coefficients).
    pub fn order(&self) -> usize {
        self.beta.len()
    }

    /// The coefficient vector.
    pub fn coefficients(&self) -> &[f64] {
        &self.beta
    }

    /// `m(x)`, evaluated by Horner's rule.
    pub fn value(&self, x: f64) -> f64 {
        self.beta.iter().rev().fold(0.0, |acc, b| acc * x + b)
    }
}

/// Basis row `h(x) = (1, x, …, x^(p−1))`.
pub fn basis_row(x: f64, p: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(p);
    let mut pow = 1.0;
    for _ in 0..p {
        row.push(pow);
        pow *= x;
    }
    row
}

/// Precomputed quantities for building many Gram matrices over a fixed point
/// set: packed pairwise squared distances and, optionally, the fixed
/// mean-prior augmentation `P_ij = sd²·h(x_i)ᵀh(x_j)` used by the collapsed
/// sampler (see [`crate::bayes`]).
pub struct GramCache {
    n: usize,
    /// Lower-triangle packed `(x_i − x_j)²`, row-major, `j ≤ i`.
    d2: Vec<f64>,
    /// Lower-triangle packed augmentation, same layout; empty when unused.
    aug: Vec<f64>,
    /// Diagonal of the augmentation (duplicated out of `aug` for clarity).
    aug_diag: Vec<f64>,
}

impl GramCache {
    /// Cache for plain kernel matrices over `xs`.
    pub fn new(xs: &[f64]) -> Self {
        Self::build_cache(xs, 0, 0.0)
    }

    /// Cache that additionally folds a `N(0, sd²·I)` prior on `p` polynomial
    /// mean coefficients into the kernel: `K̃ = K + sd²·h(x)ᵀh(x′)`.
    pub fn with_mean_prior(xs: &[f64], p: usize, prior_sd: f64) -> Self {
        Self::build_cache(xs, p, prior_sd * prior_sd)
    }

    fn build_cache(xs: &[f64], p: usize, prior_var: f64) -> Self {
        let n = xs.len();
        let mut d2 = Vec::with_capacity(n * (n + 1) / 2);
        let mut aug = Vec::new();
        let mut aug_diag = Vec::new();
        let augmented = p > 0;
        if augmented {
            aug.reserve(n * (n + 1) / 2);
            aug_diag.reserve(n);
        }
        for i in 0..n {
            for j in 0..=i {
                let d = xs[i] - xs[j];
                d2.push(d * d);
                if augmented {
                    // sd²·Σ_k (x_i x_j)^k without forming basis rows
                    let mut s = 0.0;
                    let mut pow = 1.0;
                    for _ in 0..p {
                        s += pow;
                        pow *= xs[i] * xs[j];
                    }
                    aug.push(prior_var * s);
                }
            }
            if augmented {
                aug_diag.push(*aug.last().unwrap());
            }
        }
        GramCache {
            n,
            d2,
            aug,
            aug_diag,
        }
    }

    /// Number of cached points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Build `K (+ P) + (σ²_y + base jitter)·I` for the cached points.
    ///
    /// Only the lower triangle is filled (callers feed it straight into a
    /// lower-Cholesky); use [`gram_matrix`] for a full symmetric matrix.
    pub fn build_noisy(&self, k: &KernelParams) -> faer::Mat<f64> {
        let n = self.n;
        let inv2 = -1.0 / (2.0 * k.lengthscale * k.lengthscale);
        let s2 = k.variance;
        let diag_extra = k.noise + base_jitter(k);
        let mut m = faer::Mat::zeros(n, n);
        let mut idx = 0;
        if self.aug.is_empty() {
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] = s2 * (self.d2[idx] * inv2).exp();
                    idx += 1;
                }
                m[(i, i)] += diag_extra;
            }
        } else {
            for i in 0..n {
                for j in 0..=i {
                    m[(i, j)] = s2 * (self.d2[idx] * inv2).exp() + self.aug[idx];
                    idx += 1;
                }
                m[(i, i)] += diag_extra;
            }
        }
        m
    }

    /// Diagonal of the augmentation term at the cached points (empty when the
    /// cache was built without a mean prior).
    pub fn aug_diag(&self) -> &[f64] {
        &self.aug_diag
    }
}
