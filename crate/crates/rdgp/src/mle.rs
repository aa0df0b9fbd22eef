//! Maximum-likelihood estimation of the kernel parameters, and the
//! plug-in treatment-effect interval built from it.
//!
//! The marginal likelihood is maximized over `(log ℓ, log σ²_GP, log σ²_y)`
//! with the mean coefficients profiled out exactly: at any kernel value the
//! GLS solution `β̂ = (Hᵀ A⁻¹ H)⁻¹ Hᵀ A⁻¹ y` maximizes the marginal
//! log-likelihood over `β`, so the outer search is over three dimensions
//! only. The search itself is a deterministic Nelder–Mead simplex from a
//! fixed set of data-scaled starting points covering short/long
//! lengthscale and signal/noise-dominant regimes.
//!
//! The plug-in interval treats the MLE as known truth:
//! `τ̂ ± z·sd(τ | θ̂)`. It ignores hyperparameter uncertainty, which is
//! exactly why the simulation study compares it against the full posterior.

use crate::bayes::FitSpec;
use crate::error::{Error, Result};
use crate::kernel::{base_jitter, basis_row, gram_matrix, KernelParams, MeanBasis};
use crate::linalg::{cholesky_spd, dot};
use crate::model::{tau_conditional, Arm, Assumption, KernelSpec, ModelSpec, RddDataset};
use crate::Z_975;

const LN_2PI: f64 = 1.8378770664093453;

/// Log-parameters are confined to this box; outside it the objective is
/// treated as infeasible. e^(±30) comfortably brackets any data scale
/// while keeping the Gram factorizable.
const LOG_BOX: f64 = 30.0;

const NM_MAX_ITERS: usize = 250;
const NM_TOL: f64 = 1e-9;

/// Maximum-likelihood point estimates for the two-arm model.
#[derive(Debug, Clone)]
pub struct MleEstimate {
    pub kernels: KernelSpec,
    pub mean_treatment: MeanBasis,
    pub mean_control: MeanBasis,
    /// Maximized summed marginal log-likelihood (profiled means).
    pub loglik: f64,
}

impl MleEstimate {
    /// The fitted model, ready for [`tau_conditional`].
    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kernels: self.kernels,
            mean_treatment: self.mean_treatment.clone(),
            mean_control: self.mean_control.clone(),
        }
    }
}

/// Plug-in treatment-effect estimate at the MLE.
#[derive(Debug, Clone)]
pub struct MleTau {
    pub estimate: MleEstimate,
    pub tau_hat: f64,
    pub se: f64,
    /// `τ̂ ± z₀.₉₇₅·se` (normal critical value).
    pub interval: (f64, f64),
}

/// Profiled negative log-likelihood of one arm at a fixed kernel: solves
/// the GLS mean exactly, then evaluates the marginal likelihood at it,
/// sharing a single factorization.
fn profiled_arm_nll(xs: &[f64], ys: &[f64], p: usize, k: &KernelParams) -> Option<(f64, MeanBasis)> {
    let n = xs.len();
    let a = gram_matrix(xs, k, true);
    let chol = cholesky_spd(&a, k.variance, base_jitter(k)).ok()?;

    let mean = if p == 0 {
        MeanBasis::zero()
    } else {
        let h = faer::Mat::from_fn(n, p, |i, j| basis_row(xs[i], p)[j]);
        let ainv_h = chol.solve_mat(&h);
        let mut m = faer::Mat::zeros(p, p);
        for r in 0..p {
            for c in 0..p {
                m[(r, c)] = (0..n).map(|i| h[(i, r)] * ainv_h[(i, c)]).sum();
            }
        }
        let rhs: Vec<f64> = (0..p)
            .map(|r| (0..n).map(|i| ainv_h[(i, r)] * ys[i]).sum())
            .collect();
        let scale = (0..p).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
        let mchol = cholesky_spd(&m, scale, 0.0).ok()?;
        MeanBasis::new(mchol.solve(&rhs)).ok()?
    };

    let r: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| y - mean.value(x)).collect();
    let alpha = chol.solve(&r);
    let mll = -0.5 * (dot(&r, &alpha) + chol.logdet() + n as f64 * LN_2PI);
    Some((-mll, mean))
}

fn in_box(u: &[f64]) -> bool {
    u.iter().all(|&v| v.is_finite() && v.abs() <= LOG_BOX)
}

fn kernel_from_log(u: &[f64]) -> KernelParams {
    KernelParams {
        lengthscale: u[0].exp(),
        variance: u[1].exp(),
        noise: u[2].exp(),
    }
}

/// Deterministic Nelder–Mead minimizer (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5). Returns the best vertex and its value;
/// `f` may return `INFINITY` for infeasible points.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("objective returned NaN"));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        if worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(v, _)| v[j]).sum::<f64>() / d as f64)
            .collect();
        let reflect: Vec<f64> = (0..d)
            .map(|j| centroid[j] + (centroid[j] - simplex[d].0[j]))
            .collect();
        let fr = f(&reflect);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..d)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - simplex[d].0[j]))
                .collect();
            let fe = f(&expand);
            simplex[d] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflect, fr);
        } else {
            let contract: Vec<f64> = (0..d)
                .map(|j| centroid[j] + 0.5 * (simplex[d].0[j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < simplex[d].1 {
                simplex[d] = (contract, fc);
            } else {
                let best_v = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = (0..d)
                        .map(|j| best_v[j] + 0.5 * (item.0[j] - best_v[j]))
                        .collect();
                    item.1 = f(&shrunk);
                    item.0 = shrunk;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("objective returned NaN"));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx)
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

/// Fixed multi-start set in log space, scaled to the data: combinations of
/// short/medium/long lengthscale with signal- and noise-dominant variance
/// splits.
fn starts(xs: &[f64], ys: &[f64]) -> Vec<[f64; 3]> {
    let r = span(xs);
    let v = crate::mcmc::sample_var(ys).max(1e-8);
    let (ll, lv) = ((r / 4.0).ln(), v.ln());
    vec![
        [ll, lv, lv - 2.3],
        [(r / 16.0).ln(), lv, lv - 2.3],
        [r.ln(), lv, lv - 2.3],
        [ll, lv - 2.3, lv],
        [ll, lv + 0.7, lv - 4.6],
        [(r / 16.0).ln(), lv + 0.7, lv - 4.6],
    ]
}

/// Single-arm kernel MLE with a profiled polynomial mean of order `p`.
/// Used directly by the sliding-window diagnostics.
///
/// # Errors
/// [`Error::OptimizationFailure`] if every start is infeasible;
/// [`Error::InsufficientSupport`] for fewer than 3 points.
pub fn mle_arm(xs: &[f64], ys: &[f64], p: usize) -> Result<(KernelParams, MeanBasis, f64)> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return Err(Error::InsufficientSupport(format!(
            "kernel MLE needs at least 3 points, got {}",
            xs.len()
        )));
    }
    let objective = |u: &[f64]| -> f64 {
        if !in_box(u) {
            return f64::INFINITY;
        }
        profiled_arm_nll(xs, ys, p, &kernel_from_log(u))
            .map_or(f64::INFINITY, |(nll, _)| nll)
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts(xs, ys) {
        let (u, fu) = nelder_mead(&objective, &s, 0.7, NM_MAX_ITERS, NM_TOL);
        if fu.is_finite() && best.as_ref().is_none_or(|(_, fb)| fu < *fb) {
            best = Some((u, fu));
        }
    }
    let (u, _) = best.ok_or_else(|| {
        Error::OptimizationFailure("all likelihood-optimization starts failed".into())
    })?;
    let k = kernel_from_log(&u);
    let (nll, mean) = profiled_arm_nll(xs, ys, p, &k).ok_or_else(|| {
        Error::OptimizationFailure("optimum failed to refactorize".into())
    })?;
    Ok((k, mean, -nll))
}

/// Joint kernel MLE for the two-arm model. Under SameCovariance the two
/// arm likelihoods share one kernel triple and are summed; under
/// Stationary the problem separates and each arm is maximized on its own.
///
/// # Errors
/// [`Error::EmptyArm`], [`Error::OptimizationFailure`].
pub fn mle_hyperparams(data: &RddDataset, spec: &FitSpec) -> Result<MleEstimate> {
    let (xt, yt) = data.arm_xy(Arm::Treatment);
    let (xc, yc) = data.arm_xy(Arm::Control);
    for (arm, xs) in [(Arm::Treatment, &xt), (Arm::Control, &xc)] {
        if xs.is_empty() {
            return Err(Error::EmptyArm(arm));
        }
    }
    let p = spec.mean_order;

    match spec.assumption {
        Assumption::SameCovariance => {
            let objective = |u: &[f64]| -> f64 {
                if !in_box(u) {
                    return f64::INFINITY;
                }
                let k = kernel_from_log(u);
                match (profiled_arm_nll(&xt, &yt, p, &k), profiled_arm_nll(&xc, &yc, p, &k)) {
                    (Some((nt, _)), Some((nc, _))) => nt + nc,
                    _ => f64::INFINITY,
                }
            };
            let mut best: Option<(Vec<f64>, f64)> = None;
            for s in starts(data.x(), data.y()) {
                let (u, fu) = nelder_mead(&objective, &s, 0.7, NM_MAX_ITERS, NM_TOL);
                if fu.is_finite() && best.as_ref().is_none_or(|(_, fb)| fu < *fb) {
                    best = Some((u, fu));
                }
            }
            let (u, fu) = best.ok_or_else(|| {
                Error::OptimizationFailure("all likelihood-optimization starts failed".into())
            })?;
            let k = kernel_from_log(&u);
            let (_, mean_t) = profiled_arm_nll(&xt, &yt, p, &k)
                .ok_or_else(|| Error::OptimizationFailure("optimum failed to refactorize".into()))?;
            let (_, mean_c) = profiled_arm_nll(&xc, &yc, p, &k)
                .ok_or_else(|| Error::OptimizationFailure("optimum failed to refactorize".into()))?;
            Ok(MleEstimate {
                kernels: KernelSpec::SameCovariance(k),
                mean_treatment: mean_t,
                mean_control: mean_c,
                loglik: -fu,
            })
        }
        Assumption::Stationary => {
            let (kt, mean_t, ll_t) = mle_arm(&xt, &yt, p)?;
            let (kc, mean_c, ll_c) = mle_arm(&xc, &yc, p)?;
            Ok(MleEstimate {
                kernels: KernelSpec::Stationary { treatment: kt, control: kc },
                mean_treatment: mean_t,
                mean_control: mean_c,
                loglik: ll_t + ll_c,
            })
        }
    }
}

/// Plug-in τ inference at the MLE: the conditional posterior of τ given
/// the estimated hyperparameters, with a normal 95% interval.
pub fn mle_tau(data: &RddDataset, spec: &FitSpec) -> Result<MleTau> {
    let estimate = mle_hyperparams(data, spec)?;
    let cond = tau_conditional(data, &estimate.model_spec())?;
    let se = cond.variance.max(0.0).sqrt();
    Ok(MleTau {
        estimate,
        tau_hat: cond.mean,
        se,
        interval: (cond.mean - Z_975 * se, cond.mean + Z_975 * se),
    })
}
