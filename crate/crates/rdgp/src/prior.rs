//! Prior densities for the Bayesian variant.
//!
//! Defaults follow a weakly informative recipe: independent
//! `half-Cauchy(0, 5)` priors on the inverse squared lengthscale `1/ℓ²`,
//! the signal variance `σ²_GP`, and the noise variance `σ²_y` (Gelman 2006
//! argues for half-Cauchy scales on variance-like quantities), and a
//! `N(0, sd²·I)` prior on the mean coefficients `β` with a large default
//! `sd = 100` so the parametric mean is regularized only faintly.
//!
//! [`PriorSpec::log_density`] is a density with respect to
//! `(d(1/ℓ²), dσ²_GP, dσ²_y, dβ)`; samplers working on transformed axes
//! (e.g. `log ℓ`) must add their own change-of-variables terms.

use crate::error::{Error, Result};
use crate::kernel::KernelParams;

/// `log p(z)` for `z ~ half-Cauchy(0, scale)`, supported on `z > 0`:
/// `p(z) = 2·scale / (π·(scale² + z²))`.
pub fn half_cauchy_logpdf(z: f64, scale: f64) -> f64 {
    if z <= 0.0 || !z.is_finite() {
        return f64::NEG_INFINITY;
    }
    (2.0 * scale / std::f64::consts::PI).ln() - (scale * scale + z * z).ln()
}

/// Quantile function of `half-Cauchy(0, scale)`: `scale·tan(π·p/2)`.
pub fn half_cauchy_quantile(p: f64, scale: f64) -> f64 {
    scale * (std::f64::consts::FRAC_PI_2 * p).tan()
}

/// `log p(z)` for `z ~ N(mean, sd²)`.
pub fn normal_logpdf(z: f64, mean: f64, sd: f64) -> f64 {
    let d = (z - mean) / sd;
    -0.5 * d * d - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Which transform of the lengthscale carries the half-Cauchy prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LengthscaleParam {
    /// half-Cauchy on `1/ℓ²` (the default; shrinks toward long
    /// lengthscales, i.e. toward nearly linear regression functions).
    InverseSquared,
    /// half-Cauchy on `ℓ` itself.
    Direct,
}

/// Hyperparameter prior specification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorSpec {
    /// Standard deviation of the independent `N(0, beta_sd²)` coefficient
    /// priors.
    pub beta_sd: f64,
    /// Scale of every half-Cauchy prior.
    pub hc_scale: f64,
    /// Parameterization carrying the lengthscale prior.
    pub lengthscale_param: LengthscaleParam,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            beta_sd: 100.0,
            hc_scale: 5.0,
            lengthscale_param: LengthscaleParam::InverseSquared,
        }
    }
}

impl PriorSpec {
    /// # Errors
    /// [`Error::InvalidParameter`] unless both scales are positive and
    /// finite.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta_sd", self.beta_sd), ("hc_scale", self.hc_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "prior {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Joint log prior density of one kernel triple, with respect to
    /// `(d(1/ℓ²) or dℓ, dσ²_GP, dσ²_y)` per `lengthscale_param`.
    pub fn kernel_log_density(&self, k: &KernelParams) -> f64 {
        let len_term = match self.lengthscale_param {
            LengthscaleParam::InverseSquared => {
                half_cauchy_logpdf(1.0 / (k.lengthscale * k.lengthscale), self.hc_scale)
            }
            LengthscaleParam::Direct => half_cauchy_logpdf(k.lengthscale, self.hc_scale),
        };
        len_term
            + half_cauchy_logpdf(k.variance, self.hc_scale)
            + half_cauchy_logpdf(k.noise, self.hc_scale)
    }

    /// Log prior density of a coefficient vector under `N(0, beta_sd²·I)`.
    pub fn beta_log_density(&self, beta: &[f64]) -> f64 {
        beta.iter().map(|&b| normal_logpdf(b, 0.0, self.beta_sd)).sum()
    }
}
