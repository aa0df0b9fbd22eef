//! Conditional GP posterior at a point and the GP marginal log-likelihood.
//!
//! For observations `y` at `xs` with mean `m(·)`, kernel `K`, and noise
//! `σ²_y`, write `A = K(xs, xs) + σ²_y I` and `r = y − m(xs)`. Standard
//! multivariate-normal conditioning gives the posterior at a query point:
//!
//! ```text
//! mean(x*) = m(x*) + K(x*, xs) A⁻¹ r
//! var(x*)  = σ²_GP − K(x*, xs) A⁻¹ K(xs, x*)
//! ```
//!
//! and the marginal log-likelihood `log N(y | m(xs), A)`. All solves go
//! through the jittered Cholesky in [`crate::linalg`]; no inverse is formed
//! except in the gradient's trace term, which exists for validation and
//! gradient-based optimizers.

use crate::error::{Error, Result};
use crate::kernel::{base_jitter, gram_matrix, kernel_eval, KernelParams, MeanBasis};
use crate::linalg::{cholesky_spd, dot, Chol};

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Posterior mean and variance of the latent function at one query point.
///
/// The variance is reported as computed; it may undershoot zero by no more
/// than the solver's jitter tolerance, and callers that draw from the
/// posterior should clamp at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConditional {
    pub mean: f64,
    pub variance: f64,
}

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "xs and ys must have equal length, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

fn noisy_factor(xs: &[f64], k: &KernelParams) -> Result<Chol> {
    let a = gram_matrix(xs, k, true);
    cholesky_spd(&a, k.variance, base_jitter(k))
}

/// Exact conditional posterior of the function value at `x_star`.
///
/// With no observations this is the prior `(m(x*), σ²_GP)`.
///
/// # Errors
/// [`Error::FactorizationFailure`] when the noisy Gram matrix is numerically
/// singular past the jitter schedule (e.g. duplicated `xs` with `σ²_y = 0`);
/// [`Error::InvalidParameter`] for invalid kernels or mismatched lengths.
pub fn gp_conditional(
    xs: &[f64],
    ys: &[f64],
    mean_fn: &MeanBasis,
    k: &KernelParams,
    x_star: f64,
) -> Result<GpConditional> {
    k.validate()?;
    check_lengths(xs, ys)?;
    if xs.is_empty() {
        return Ok(GpConditional {
            mean: mean_fn.value(x_star),
            variance: k.variance,
        });
    }
    let chol = noisy_factor(xs, k)?;
    let r: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - mean_fn.value(x))
        .collect();
    let kstar: Vec<f64> = xs.iter().map(|&x| kernel_eval(x, x_star, k)).collect();
    let alpha = chol.solve(&r);
    let mean = mean_fn.value(x_star) + dot(&kstar, &alpha);
    let variance = k.variance - chol.inv_quad_form(&kstar);
    Ok(GpConditional { mean, variance })
}

/// Marginal log-likelihood `log N(ys | m(xs), K + σ²_y I)`.
///
/// # Errors
/// As for [`gp_conditional`]; additionally rejects empty data.
pub fn marginal_loglik(xs: &[f64], ys: &[f64], mean_fn: &MeanBasis, k: &KernelParams) -> Result<f64> {
    k.validate()?;
    check_lengths(xs, ys)?;
    if xs.is_empty() {
        return Err(Error::InvalidParameter(
            "marginal log-likelihood requires at least one observation".into(),
        ));
    }
    let chol = noisy_factor(xs, k)?;
    let r: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - mean_fn.value(x))
        .collect();
    Ok(-0.5 * (chol.inv_quad_form(&r) + chol.logdet() + xs.len() as f64 * LN_2PI))
}

/// Marginal log-likelihood together with its gradient in
/// `(log ℓ, log σ²_GP, log σ²_y)`.
///
/// Uses the standard identity `∂L = ½ αᵀ(∂A)α − ½ tr(A⁻¹ ∂A)` with
/// `α = A⁻¹r`. The construction jitter (`1e−8·σ²_GP` on the diagonal) is
/// part of `A` and is differentiated with it, so central finite differences
/// of [`marginal_loglik`] reproduce this gradient tightly.
///
/// The trace term materializes `A⁻¹`, so this costs a dense solve per
/// parameter; samplers and the Nelder–Mead optimizer do not call it.
pub fn marginal_loglik_grad(
    xs: &[f64],
    ys: &[f64],
    mean_fn: &MeanBasis,
    k: &KernelParams,
) -> Result<(f64, [f64; 3])> {
    k.validate()?;
    check_lengths(xs, ys)?;
    let n = xs.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "marginal log-likelihood requires at least one observation".into(),
        ));
    }
    let chol = noisy_factor(xs, k)?;
    let r: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| y - mean_fn.value(x))
        .collect();
    let alpha = chol.solve(&r);
    let loglik = -0.5 * (dot(&r, &alpha) + chol.logdet() + n as f64 * LN_2PI);

    let ainv = chol.solve_mat(&faer::Mat::identity(n, n));
    let ell2 = k.lengthscale * k.lengthscale;
    let jit = base_jitter(k);

    // ∂A/∂logℓ = K ∘ d²/ℓ²; ∂A/∂logσ²_GP = K + jitter·I; ∂A/∂logσ²_y = σ²_y·I
    let mut grad = [0.0f64; 3];
    for i in 0..n {
        for j in 0..n {
            let kij = kernel_eval(xs[i], xs[j], k);
            let d = xs[i] - xs[j];
            let da_ell = kij * d * d / ell2;
            let da_s2 = kij + if i == j { jit } else { 0.0 };
            let w = alpha[i] * alpha[j] - ainv[(i, j)];
            grad[0] += 0.5 * w * da_ell;
            grad[1] += 0.5 * w * da_s2;
        }
        let w = alpha[i] * alpha[i] - ainv[(i, i)];
        grad[2] += 0.5 * w * k.noise;
    }
    Ok((loglik, grad))
}
