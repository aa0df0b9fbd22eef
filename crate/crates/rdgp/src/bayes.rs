//! Full-Bayesian inference for the boundary treatment effect.
//!
//! The model per arm `j ∈ {T, C}` is
//!
//! ```text
//! y_i = h(x_i)ᵀ β_j + f_j(x_i) + ε_i,   f_j ~ GP(0, K),   ε_i ~ N(0, σ²_y)
//! ```
//!
//! with `β_j ~ N(0, sd²·I)` and half-Cauchy priors on the kernel
//! parameters (see [`crate::prior`]). Inference is a two-stage composition:
//! draws of the hyperparameters from their joint posterior via adaptive
//! random-walk Metropolis ([`crate::mcmc`]), then for each draw `d` one
//! exact draw `τ_d ~ N(mean_d, var_d)` from the Gaussian conditional of
//! `τ = μ_T(b) − μ_C(b)` at those hyperparameters.
//!
//! By default the mean coefficients are integrated out analytically rather
//! than sampled: a `N(0, B)` prior on `β` makes `h(x)ᵀβ + f(x)` a zero-mean
//! GP with kernel `K(x, x′) + h(x)ᵀ B h(x′)`, so the kernel-parameter
//! marginal posterior and every `τ` conditional are unchanged while the
//! chain drops from `3 + 2p` to 3 dimensions. Setting
//! [`McmcConfig::collapse_beta`] to `false` samples `β` explicitly; the
//! two modes agree within Monte Carlo error and the test suite checks it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::marginal_loglik;
use crate::kernel::{base_jitter, basis_row, gram_matrix, GramCache, KernelParams, MeanBasis};
use crate::linalg::{cholesky_spd, dot};
use crate::mcmc::{mix_seed, run_chains, sample_mean, sample_quantile};
use crate::model::{Arm, Assumption, KernelSpec, ModelSpec, RddDataset};
use crate::prior::{half_cauchy_logpdf, LengthscaleParam, PriorSpec};

const LN_2PI: f64 = 1.8378770664093453;

// Sub-seed tags keeping the chain, τ-draw, β-draw, and init streams
// independent of one another and of scheduling.
const TAU_STREAM: u64 = 0x0074_6175;
const BETA_STREAM: u64 = 0x6265_7461;
const INIT_STREAM: u64 = 0x696e_6974;
const ARM_T_STREAM: u64 = 0x61_544d;
const ARM_C_STREAM: u64 = 0x61_434d;

/// Curves are summarized from at most this many evenly thinned draws; one
/// Cholesky per retained draw is the dominant cost.
const CURVE_DRAWS: usize = 200;

/// Structural choices the sampler infers parameters for: the covariance
/// assumption and the polynomial mean order `p` per arm (`p = 0` is the
/// zero-mean variant, `p = 2` the default intercept-plus-slope mean).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FitSpec {
    pub assumption: Assumption,
    pub mean_order: usize,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { assumption: Assumption::SameCovariance, mean_order: 2 }
    }
}

/// Point-mass overrides for individual kernel parameters (testing hooks:
/// a fixed parameter is excluded from the chain and pinned at the given
/// value; under Stationary the pin applies to both arms).
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FixedKernel {
    pub lengthscale: Option<f64>,
    pub variance: Option<f64>,
    pub noise: Option<f64>,
}

/// Sampler configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McmcConfig {
    /// Independent chains (draws are merged in chain order).
    pub chains: usize,
    /// Total iterations per chain, including warmup.
    pub iters: usize,
    /// Warmup iterations discarded from each chain.
    pub warmup: usize,
    pub seed: u64,
    /// Drop the likelihood term (prior-only mode, a sampler-correctness
    /// testing hook).
    pub prior_only: bool,
    /// Integrate the mean coefficients out analytically (default) instead
    /// of sampling them.
    pub collapse_beta: bool,
    pub fixed: FixedKernel,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            iters: 2000,
            warmup: 1000,
            seed: 0,
            prior_only: false,
            collapse_beta: true,
            fixed: FixedKernel::default(),
        }
    }
}

impl McmcConfig {
    /// Post-warmup draws kept per chain.
    pub fn kept(&self) -> usize {
        self.iters.saturating_sub(self.warmup)
    }

    /// # Errors
    /// [`Error::InvalidParameter`] unless `chains ≥ 1`, `iters > warmup`,
    /// and any fixed values are positive and finite.
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidParameter("chains must be at least 1".into()));
        }
        if self.iters <= self.warmup {
            return Err(Error::InvalidParameter(format!(
                "iters ({}) must exceed warmup ({})",
                self.iters, self.warmup
            )));
        }
        for (name, v) in [
            ("fixed lengthscale", self.fixed.lengthscale),
            ("fixed variance", self.fixed.variance),
            ("fixed noise", self.fixed.noise),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Convergence and mixing diagnostics for one run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    /// Split-R̂ per sampled dimension (treatment arm's chain first under
    /// Stationary).
    pub rhat: Vec<f64>,
    /// Post-warmup acceptance rate per chain.
    pub accept_rates: Vec<f64>,
    /// `false` flags non-convergence (some split-R̂ > 1.05); the run still
    /// returns draws — callers decide whether to warn or rerun.
    pub converged: bool,
}

/// Posterior draws of the hyperparameters.
#[derive(Debug, Clone)]
pub struct HyperDraws {
    /// Kernel parameters per draw (positivity holds by construction: the
    /// chain lives on log scales).
    pub kernels: Vec<KernelSpec>,
    /// Mean coefficients per draw, `mean_order` entries each.
    pub beta_treatment: Vec<Vec<f64>>,
    pub beta_control: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

/// Posterior of the boundary treatment effect.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TauPosterior {
    pub draws: Vec<f64>,
    /// Posterior mean of the draws.
    pub point_estimate: f64,
    /// Central 95% interval (2.5% and 97.5% sample quantiles).
    pub interval: (f64, f64),
    pub diagnostics: Diagnostics,
}

/// Pointwise posterior summary of one arm's regression function on a grid.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ArmCurve {
    pub arm: Arm,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Full fit output: τ posterior, per-draw kernels, optional curves.
#[derive(Debug, Clone)]
pub struct GprFit {
    pub tau: TauPosterior,
    pub kernels: Vec<KernelSpec>,
    pub curves: Vec<ArmCurve>,
}

/// Joint unnormalized log posterior density of a fully specified model:
/// the two arm marginal log-likelihoods plus the log prior densities
/// (half-Cauchy terms once for the shared kernel triple under
/// SameCovariance, once per arm under Stationary; independent normals on
/// every mean coefficient).
///
/// The density is with respect to `(d(1/ℓ²), dσ²_GP, dσ²_y, dβ)` under the
/// default prior parameterization; out-of-support parameters yield `−∞`
/// rather than an error.
///
/// # Errors
/// [`Error::EmptyArm`] if an arm has no data; factorization failures
/// propagate.
pub fn log_posterior(data: &RddDataset, spec: &ModelSpec, priors: &PriorSpec) -> Result<f64> {
    priors.validate()?;
    let mut kernel_prior = 0.0;
    match &spec.kernels {
        KernelSpec::SameCovariance(k) => {
            if k.validate().is_err() {
                return Ok(f64::NEG_INFINITY);
            }
            kernel_prior += priors.kernel_log_density(k);
        }
        KernelSpec::Stationary { treatment, control } => {
            for k in [treatment, control] {
                if k.validate().is_err() {
                    return Ok(f64::NEG_INFINITY);
                }
                kernel_prior += priors.kernel_log_density(k);
            }
        }
    }
    if kernel_prior == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let beta_prior = priors.beta_log_density(spec.mean_treatment.coefficients())
        + priors.beta_log_density(spec.mean_control.coefficients());

    let mut loglik = 0.0;
    for arm in Arm::BOTH {
        let (xs, ys) = data.arm_xy(arm);
        if xs.is_empty() {
            return Err(Error::EmptyArm(arm));
        }
        loglik += marginal_loglik(&xs, &ys, spec.mean_for(arm), spec.kernels.for_arm(arm))?;
    }
    Ok(loglik + kernel_prior + beta_prior)
}

/// Posterior draws of all hyperparameters. In the default collapsed mode
/// the mean coefficients are reconstructed per kernel draw from their
/// exact Gaussian conditional `β | θ_K, y` (so the returned joint draws
/// target the same posterior as explicit sampling).
pub fn sample_hyperparams(
    data: &RddDataset,
    spec: &FitSpec,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<HyperDraws> {
    let engine = run_engine(data, spec, priors, cfg)?;
    let p = spec.mean_order;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, BETA_STREAM));
    let d = engine.kernels_t.len();
    let mut beta_treatment = Vec::with_capacity(d);
    let mut beta_control = Vec::with_capacity(d);
    for i in 0..d {
        match &engine.beta_t[i] {
            Some(b) => {
                beta_treatment.push(b.clone());
                beta_control.push(engine.beta_c[i].clone().expect("joint mode has both arms"));
            }
            None => {
                beta_treatment.push(draw_beta_conditional(
                    &engine.ctx_t,
                    &engine.kernels_t[i],
                    p,
                    priors.beta_sd,
                    cfg.prior_only,
                    &mut rng,
                )?);
                beta_control.push(draw_beta_conditional(
                    &engine.ctx_c,
                    &engine.kernels_c[i],
                    p,
                    priors.beta_sd,
                    cfg.prior_only,
                    &mut rng,
                )?);
            }
        }
    }
    Ok(HyperDraws {
        kernels: engine.kernel_specs(),
        beta_treatment,
        beta_control,
        diagnostics: engine.diagnostics(),
    })
}

/// Posterior of `τ` via the two-stage draw.
///
/// # Errors
/// [`Error::InvalidParameter`] in prior-only mode (there is no data
/// posterior to draw from); otherwise as [`sample_hyperparams`].
pub fn tau_posterior(
    data: &RddDataset,
    spec: &FitSpec,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<TauPosterior> {
    Ok(fit_gpr(data, spec, priors, cfg, None)?.tau)
}

/// Fit the model and additionally summarize the per-arm posterior curves
/// on `grid` (each arm is evaluated on its own side of the boundary,
/// boundary point included for both).
pub fn fit_gpr(
    data: &RddDataset,
    spec: &FitSpec,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    grid: Option<&[f64]>,
) -> Result<GprFit> {
    if cfg.prior_only {
        return Err(Error::InvalidParameter(
            "prior-only mode has no treatment-effect posterior".into(),
        ));
    }
    let engine = run_engine(data, spec, priors, cfg)?;
    let draws = tau_draws(&engine.moments, cfg.seed);
    let point_estimate = sample_mean(&draws);
    let interval = (sample_quantile(&draws, 0.025), sample_quantile(&draws, 0.975));

    let mut curves = Vec::new();
    if let Some(grid) = grid {
        let b = data.boundary();
        for arm in Arm::BOTH {
            let pts: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&x| match arm {
                    Arm::Treatment => x >= b,
                    Arm::Control => x <= b,
                })
                .collect();
            if !pts.is_empty() {
                curves.push(engine.curve(arm, &pts));
            }
        }
    }

    Ok(GprFit {
        tau: TauPosterior {
            draws,
            point_estimate,
            interval,
            diagnostics: engine.diagnostics(),
        },
        kernels: engine.kernel_specs(),
        curves,
    })
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct ArmMoments {
    mean: f64,
    var: f64,
}

impl ArmMoments {
    fn nan() -> Self {
        ArmMoments { mean: f64::NAN, var: f64::NAN }
    }
}

#[derive(Debug, Clone, Copy)]
struct PairMoments {
    t: ArmMoments,
    c: ArmMoments,
}

/// Which kernel parameters the chain samples, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KDim {
    Len,
    Var,
    Noise,
}

#[derive(Debug, Clone)]
struct Packing {
    kdims: Vec<KDim>,
    fixed: FixedKernel,
    /// Coefficients per arm appended to the chain state (0 when collapsed
    /// or zero-mean).
    beta_dims: usize,
}

impl Packing {
    fn new(cfg: &McmcConfig, mean_order: usize) -> Self {
        let mut kdims = Vec::new();
        if cfg.fixed.lengthscale.is_none() {
            kdims.push(KDim::Len);
        }
        if cfg.fixed.variance.is_none() {
            kdims.push(KDim::Var);
        }
        if cfg.fixed.noise.is_none() {
            kdims.push(KDim::Noise);
        }
        let beta_dims = if cfg.collapse_beta { 0 } else { mean_order };
        Packing { kdims, fixed: cfg.fixed, beta_dims }
    }

    fn kernel(&self, v: &[f64]) -> KernelParams {
        let mut k = KernelParams {
            lengthscale: self.fixed.lengthscale.unwrap_or(f64::NAN),
            variance: self.fixed.variance.unwrap_or(f64::NAN),
            noise: self.fixed.noise.unwrap_or(f64::NAN),
        };
        for (i, d) in self.kdims.iter().enumerate() {
            let value = v[i].exp();
            match d {
                KDim::Len => k.lengthscale = value,
                KDim::Var => k.variance = value,
                KDim::Noise => k.noise = value,
            }
        }
        k
    }

    /// Log prior density of the sampled kernel coordinates in the chain's
    /// log coordinates (half-Cauchy density plus change-of-variables
    /// terms). Fixed coordinates are point masses and contribute nothing.
    fn log_prior(&self, v: &[f64], priors: &PriorSpec) -> f64 {
        let mut lp = 0.0;
        for (i, d) in self.kdims.iter().enumerate() {
            let u = v[i];
            lp += match d {
                // u = log ℓ. Under the default prior on ψ = 1/ℓ² = e^(−2u)
                // the Jacobian is |dψ/du| = 2e^(−2u), i.e. ln 2 − 2u in
                // log form; under the direct prior on ℓ = e^u it is +u.
                KDim::Len => match priors.lengthscale_param {
                    LengthscaleParam::InverseSquared => {
                        half_cauchy_logpdf((-2.0 * u).exp(), priors.hc_scale)
                            + std::f64::consts::LN_2
                            - 2.0 * u
                    }
                    LengthscaleParam::Direct => half_cauchy_logpdf(u.exp(), priors.hc_scale) + u,
                },
                // u = log σ²; |dσ²/du| = e^u.
                KDim::Var | KDim::Noise => half_cauchy_logpdf(u.exp(), priors.hc_scale) + u,
            };
        }
        lp
    }
}

/// One arm's immutable evaluation context. Squared distances (and, when
/// the mean is collapsed, the prior-mean Gram augmentation) are cached
/// once; each likelihood evaluation only rebuilds the noisy Gram and
/// refactorizes.
struct ArmCtx {
    xs: Vec<f64>,
    ys: Vec<f64>,
    cache: GramCache,
    /// `Some((p, sd))` when the `N(0, sd²)` mean prior is folded into the
    /// kernel; `None` when the mean is explicit (sampled or zero).
    collapsed: Option<(usize, f64)>,
}

impl ArmCtx {
    fn new(
        data: &RddDataset,
        arm: Arm,
        spec: &FitSpec,
        priors: &PriorSpec,
        collapse: bool,
    ) -> Result<Self> {
        let (xs, ys) = data.arm_xy(arm);
        if xs.is_empty() {
            return Err(Error::EmptyArm(arm));
        }
        let p = spec.mean_order;
        let (cache, collapsed) = if collapse && p > 0 {
            (GramCache::with_mean_prior(&xs, p, priors.beta_sd), Some((p, priors.beta_sd)))
        } else {
            (GramCache::new(&xs), None)
        };
        Ok(ArmCtx { xs, ys, cache, collapsed })
    }

    fn n(&self) -> usize {
        self.xs.len()
    }

    /// Covariance between the (mean-augmented, when collapsed) process at
    /// `x_star` and each observed point.
    fn cross_cov(&self, k: &KernelParams, x_star: f64) -> Vec<f64> {
        let mut ks: Vec<f64> = self
            .xs
            .iter()
            .map(|&xi| crate::kernel::kernel_eval(x_star, xi, k))
            .collect();
        if let Some((p, sd)) = self.collapsed {
            let s2 = sd * sd;
            let hb = basis_row(x_star, p);
            for (ki, &xi) in ks.iter_mut().zip(&self.xs) {
                *ki += s2 * dot(&hb, &basis_row(xi, p));
            }
        }
        ks
    }

    /// Prior variance of the process at `x_star`.
    fn prior_var(&self, k: &KernelParams, x_star: f64) -> f64 {
        let mut v = k.variance;
        if let Some((p, sd)) = self.collapsed {
            let hb = basis_row(x_star, p);
            v += sd * sd * dot(&hb, &hb);
        }
        v
    }

    /// Marginal log-likelihood and conditional moments of the regression
    /// function at `x_star` under one kernel value. `beta` supplies the
    /// explicit mean when not collapsed; it must be finite.
    fn eval(
        &self,
        k: &KernelParams,
        beta: Option<&[f64]>,
        x_star: f64,
    ) -> Option<(f64, ArmMoments)> {
        let n = self.n();
        let a = self.cache.build_noisy(k);
        let chol = cholesky_spd(&a, k.variance, base_jitter(k)).ok()?;

        let mean = match beta {
            Some(b) => Some(MeanBasis::new(b.to_vec()).ok()?),
            None => None,
        };
        let r: Vec<f64> = match &mean {
            Some(m) => self.xs.iter().zip(&self.ys).map(|(&x, &y)| y - m.value(x)).collect(),
            None => self.ys.clone(),
        };
        let alpha = chol.solve(&r);
        let mll = -0.5 * (dot(&r, &alpha) + chol.logdet() + n as f64 * LN_2PI);

        let ks = self.cross_cov(k, x_star);
        let m_star = mean.as_ref().map_or(0.0, |m| m.value(x_star));
        let cond_mean = m_star + dot(&ks, &alpha);
        let cond_var = self.prior_var(k, x_star) - chol.inv_quad_form(&ks);
        Some((mll, ArmMoments { mean: cond_mean, var: cond_var }))
    }

    /// Conditional mean and variance at several points under one
    /// factorization (curve summaries).
    fn eval_grid(
        &self,
        k: &KernelParams,
        beta: Option<&[f64]>,
        grid: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let a = self.cache.build_noisy(k);
        let chol = cholesky_spd(&a, k.variance, base_jitter(k)).ok()?;
        let mean = match beta {
            Some(b) => Some(MeanBasis::new(b.to_vec()).ok()?),
            None => None,
        };
        let r: Vec<f64> = match &mean {
            Some(m) => self.xs.iter().zip(&self.ys).map(|(&x, &y)| y - m.value(x)).collect(),
            None => self.ys.clone(),
        };
        let alpha = chol.solve(&r);
        let mut means = Vec::with_capacity(grid.len());
        let mut vars = Vec::with_capacity(grid.len());
        for &x in grid {
            let ks = self.cross_cov(k, x);
            let m_star = mean.as_ref().map_or(0.0, |m| m.value(x));
            means.push(m_star + dot(&ks, &alpha));
            vars.push((self.prior_var(k, x) - chol.inv_quad_form(&ks)).max(0.0));
        }
        Some((means, vars))
    }
}

/// Everything a finished kernel run needs to serve the public API:
/// draw-aligned kernels, optional explicit β, τ moments, diagnostics, and
/// the arm contexts for lazy β reconstruction and curve evaluation.
struct Engine {
    assumption: Assumption,
    ctx_t: ArmCtx,
    ctx_c: ArmCtx,
    kernels_t: Vec<KernelParams>,
    kernels_c: Vec<KernelParams>,
    beta_t: Vec<Option<Vec<f64>>>,
    beta_c: Vec<Option<Vec<f64>>>,
    moments: Vec<PairMoments>,
    rhat: Vec<f64>,
    accept_rates: Vec<f64>,
}

impl Engine {
    fn kernel_specs(&self) -> Vec<KernelSpec> {
        match self.assumption {
            Assumption::SameCovariance => {
                self.kernels_t.iter().map(|&k| KernelSpec::SameCovariance(k)).collect()
            }
            Assumption::Stationary => self
                .kernels_t
                .iter()
                .zip(&self.kernels_c)
                .map(|(&treatment, &control)| KernelSpec::Stationary { treatment, control })
                .collect(),
        }
    }

    fn diagnostics(&self) -> Diagnostics {
        let converged = self.rhat.iter().all(|&r| !r.is_finite() || r <= crate::mcmc::RHAT_THRESHOLD);
        Diagnostics {
            rhat: self.rhat.clone(),
            accept_rates: self.accept_rates.clone(),
            converged,
        }
    }

    /// Pointwise posterior curve of one arm over `pts`, from evenly
    /// thinned draws. The band is a moment-matched normal approximation of
    /// the posterior mixture: mean ± 1.96·√(E[v_d] + Var(m_d)), which is
    /// smooth in x and accurate enough for plotting.
    fn curve(&self, arm: Arm, pts: &[f64]) -> ArmCurve {
        let d = self.kernels_t.len();
        let step = d.div_ceil(CURVE_DRAWS);
        let (ctx, kernels, betas) = match arm {
            Arm::Treatment => (&self.ctx_t, &self.kernels_t, &self.beta_t),
            Arm::Control => (&self.ctx_c, &self.kernels_c, &self.beta_c),
        };
        let g = pts.len();
        let mut sum_m = vec![0.0; g];
        let mut sum_m2 = vec![0.0; g];
        let mut sum_v = vec![0.0; g];
        let mut used = 0usize;
        for i in (0..d).step_by(step.max(1)) {
            let beta = betas[i].as_deref();
            if let Some((means, vars)) = ctx.eval_grid(&kernels[i], beta, pts) {
                for j in 0..g {
                    sum_m[j] += means[j];
                    sum_m2[j] += means[j] * means[j];
                    sum_v[j] += vars[j];
                }
                used += 1;
            }
        }
        let used = used.max(1) as f64;
        let mut mean = Vec::with_capacity(g);
        let mut lower = Vec::with_capacity(g);
        let mut upper = Vec::with_capacity(g);
        for j in 0..g {
            let m = sum_m[j] / used;
            let var_m = (sum_m2[j] / used - m * m).max(0.0);
            let sd = (sum_v[j] / used + var_m).sqrt();
            mean.push(m);
            lower.push(m - 1.96 * sd);
            upper.push(m + 1.96 * sd);
        }
        ArmCurve { arm, x: pts.to_vec(), mean, lower, upper }
    }
}

fn span(xs: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo.is_finite() && hi > lo {
        hi - lo
    } else {
        1.0
    }
}

fn center_kernel(xs: &[f64], ys: &[f64]) -> KernelParams {
    let v0 = crate::mcmc::sample_var(ys).max(1e-4);
    KernelParams {
        lengthscale: span(xs) / 4.0,
        variance: v0,
        noise: 0.1 * v0,
    }
}

fn sample_z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Dispersed starting points: kernel log-centers from the data scale plus
/// Gaussian jitter, and GLS coefficient estimates for explicit-β chains.
fn make_inits(
    k0: &KernelParams,
    packing: &Packing,
    beta_centers: &[Vec<f64>],
    chains: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let kernel_center: Vec<f64> = packing
        .kdims
        .iter()
        .map(|d| match d {
            KDim::Len => k0.lengthscale.ln(),
            KDim::Var => k0.variance.ln(),
            KDim::Noise => k0.noise.ln(),
        })
        .collect();
    let mut inits = Vec::with_capacity(chains);
    for _ in 0..chains {
        let mut v: Vec<f64> = kernel_center.iter().map(|&c| c + 0.5 * sample_z(rng)).collect();
        for block in beta_centers {
            for &b in block {
                v.push(b + 0.1 * sample_z(rng));
            }
        }
        inits.push(v);
    }
    let mut scales = vec![0.4; kernel_center.len()];
    scales.extend(std::iter::repeat_n(0.3, beta_centers.iter().map(Vec::len).sum()));
    (inits, scales)
}

fn gls_or_zero(xs: &[f64], ys: &[f64], p: usize, k0: &KernelParams) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    crate::model::fit_mean_gls(xs, ys, p, k0)
        .map(|m| m.coefficients().to_vec())
        .unwrap_or_else(|_| vec![0.0; p])
}

fn run_engine(
    data: &RddDataset,
    spec: &FitSpec,
    priors: &PriorSpec,
    cfg: &McmcConfig,
) -> Result<Engine> {
    cfg.validate()?;
    priors.validate()?;
    let ctx_t = ArmCtx::new(data, Arm::Treatment, spec, priors, cfg.collapse_beta)?;
    let ctx_c = ArmCtx::new(data, Arm::Control, spec, priors, cfg.collapse_beta)?;
    let packing = Packing::new(cfg, spec.mean_order);
    let kd = packing.kdims.len();
    let p = packing.beta_dims;
    let b = data.boundary();

    match spec.assumption {
        Assumption::SameCovariance => {
            let k0 = center_kernel(data.x(), data.y());
            let beta_centers: Vec<Vec<f64>> = if p > 0 {
                vec![
                    gls_or_zero(&ctx_t.xs, &ctx_t.ys, p, &k0),
                    gls_or_zero(&ctx_c.xs, &ctx_c.ys, p, &k0),
                ]
            } else {
                Vec::new()
            };
            let mut init_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, INIT_STREAM));
            let (inits, scales) = make_inits(&k0, &packing, &beta_centers, cfg.chains, &mut init_rng);

            let target = |v: &[f64]| -> Option<(f64, PairMoments)> {
                let k = packing.kernel(v);
                let mut lp = packing.log_prior(v, priors);
                let (bt, bc) = if p > 0 {
                    let bt = &v[kd..kd + p];
                    let bc = &v[kd + p..kd + 2 * p];
                    lp += priors.beta_log_density(bt) + priors.beta_log_density(bc);
                    (Some(bt), Some(bc))
                } else {
                    (None, None)
                };
                if !lp.is_finite() {
                    return None;
                }
                if cfg.prior_only {
                    return Some((lp, PairMoments { t: ArmMoments::nan(), c: ArmMoments::nan() }));
                }
                let (mll_t, mt) = ctx_t.eval(&k, bt, b)?;
                let (mll_c, mc) = ctx_c.eval(&k, bc, b)?;
                Some((lp + mll_t + mll_c, PairMoments { t: mt, c: mc }))
            };

            let run = run_chains(&target, &inits, &scales, cfg.warmup, cfg.kept(), cfg.seed)?;
            let mut kernels = Vec::with_capacity(run.draws.len());
            let mut beta_t = Vec::with_capacity(run.draws.len());
            let mut beta_c = Vec::with_capacity(run.draws.len());
            for v in &run.draws {
                kernels.push(packing.kernel(v));
                if p > 0 {
                    beta_t.push(Some(v[kd..kd + p].to_vec()));
                    beta_c.push(Some(v[kd + p..kd + 2 * p].to_vec()));
                } else {
                    beta_t.push(None);
                    beta_c.push(None);
                }
            }
            Ok(Engine {
                assumption: Assumption::SameCovariance,
                ctx_t,
                ctx_c,
                kernels_c: kernels.clone(),
                kernels_t: kernels,
                beta_t,
                beta_c,
                moments: run.aux,
                rhat: run.rhat,
                accept_rates: run.accept_rates,
            })
        }
        Assumption::Stationary => {
            // The posterior factorizes exactly across arms (independent
            // priors, disjoint data), so each arm runs as its own chain;
            // draw pairs are matched by index.
            let mut arm_runs = Vec::with_capacity(2);
            for (ctx, stream) in [(&ctx_t, ARM_T_STREAM), (&ctx_c, ARM_C_STREAM)] {
                let arm_seed = mix_seed(cfg.seed, stream);
                let k0 = center_kernel(&ctx.xs, &ctx.ys);
                let beta_centers: Vec<Vec<f64>> = if p > 0 {
                    vec![gls_or_zero(&ctx.xs, &ctx.ys, p, &k0)]
                } else {
                    Vec::new()
                };
                let mut init_rng = ChaCha8Rng::seed_from_u64(mix_seed(arm_seed, INIT_STREAM));
                let (inits, scales) =
                    make_inits(&k0, &packing, &beta_centers, cfg.chains, &mut init_rng);

                let target = |v: &[f64]| -> Option<(f64, ArmMoments)> {
                    let k = packing.kernel(v);
                    let mut lp = packing.log_prior(v, priors);
                    let beta = if p > 0 {
                        let bb = &v[kd..kd + p];
                        lp += priors.beta_log_density(bb);
                        Some(bb)
                    } else {
                        None
                    };
                    if !lp.is_finite() {
                        return None;
                    }
                    if cfg.prior_only {
                        return Some((lp, ArmMoments::nan()));
                    }
                    let (mll, m) = ctx.eval(&k, beta, b)?;
                    Some((lp + mll, m))
                };
                arm_runs.push(run_chains(&target, &inits, &scales, cfg.warmup, cfg.kept(), arm_seed)?);
            }
            let run_c = arm_runs.pop().expect("two runs");
            let run_t = arm_runs.pop().expect("two runs");

            let unpack = |run: &crate::mcmc::McmcRun<ArmMoments>| {
                let mut kernels = Vec::with_capacity(run.draws.len());
                let mut betas = Vec::with_capacity(run.draws.len());
                for v in &run.draws {
                    kernels.push(packing.kernel(v));
                    betas.push(if p > 0 { Some(v[kd..kd + p].to_vec()) } else { None });
                }
                (kernels, betas)
            };
            let (kernels_t, beta_t) = unpack(&run_t);
            let (kernels_c, beta_c) = unpack(&run_c);
            let moments = run_t
                .aux
                .iter()
                .zip(&run_c.aux)
                .map(|(&t, &c)| PairMoments { t, c })
                .collect();
            let mut rhat = run_t.rhat;
            rhat.extend(run_c.rhat);
            let mut accept_rates = run_t.accept_rates;
            accept_rates.extend(run_c.accept_rates);
            Ok(Engine {
                assumption: Assumption::Stationary,
                ctx_t,
                ctx_c,
                kernels_t,
                kernels_c,
                beta_t,
                beta_c,
                moments,
                rhat,
                accept_rates,
            })
        }
    }
}

/// Second stage: one exact τ draw per hyperparameter draw. The stream is
/// separate from the chains', seeded only by `seed`, so the pass is
/// deterministic however the draws were produced.
fn tau_draws(moments: &[PairMoments], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, TAU_STREAM));
    moments
        .iter()
        .map(|m| {
            let mean = m.t.mean - m.c.mean;
            let var = (m.t.var + m.c.var).max(0.0);
            mean + var.sqrt() * sample_z(&mut rng)
        })
        .collect()
}

/// Exact Gaussian conditional `β | θ_K, y ~ N(β̄, M)` with
/// `M = (B⁻¹ + Hᵀ A⁻¹ H)⁻¹`, `β̄ = M Hᵀ A⁻¹ y`, `A = K + σ²_y·I` (the
/// plain Gram, not the mean-augmented one). In prior-only mode the
/// conditional is the prior itself.
fn draw_beta_conditional(
    ctx: &ArmCtx,
    k: &KernelParams,
    p: usize,
    beta_sd: f64,
    prior_only: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if p == 0 {
        return Ok(Vec::new());
    }
    if prior_only {
        return Ok((0..p).map(|_| beta_sd * sample_z(rng)).collect());
    }
    let n = ctx.n();
    let a = gram_matrix(&ctx.xs, k, true);
    let chol = cholesky_spd(&a, k.variance, base_jitter(k))?;
    let h = faer::Mat::from_fn(n, p, |i, j| basis_row(ctx.xs[i], p)[j]);
    let ainv_h = chol.solve_mat(&h);
    let prec = 1.0 / (beta_sd * beta_sd);
    let mut minv = faer::Mat::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            minv[(r, c)] = (0..n).map(|i| h[(i, r)] * ainv_h[(i, c)]).sum::<f64>()
                + if r == c { prec } else { 0.0 };
        }
    }
    let rhs: Vec<f64> = (0..p)
        .map(|r| (0..n).map(|i| ainv_h[(i, r)] * ctx.ys[i]).sum())
        .collect();
    let scale = (0..p).map(|i| minv[(i, i)]).fold(0.0f64, f64::max);
    let mchol = cholesky_spd(&minv, scale, 0.0)?;
    let mut beta = mchol.solve(&rhs);
    let z: Vec<f64> = (0..p).map(|_| sample_z(rng)).collect();
    for (b, e) in beta.iter_mut().zip(mchol.solve_lower_transpose(&z)) {
        *b += e;
    }
    Ok(beta)
}
