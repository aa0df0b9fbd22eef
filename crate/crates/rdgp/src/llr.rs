//! Local linear (and local polynomial) regression at the boundary — the
//! frequentist comparison baseline, and the window source for the Cut
//! variant via [`crate::ik`].
//!
//! Each arm is fit by weighted least squares with kernel weights
//! `K((x_i − b)/h)` and the fit is read off at `b`; the treatment effect
//! is the difference of the two boundary predictions. Standard errors use
//! a heteroskedasticity-robust (HC1) sandwich on the weighted design.
//!
//! Internally the design is built in scaled units `u = (x − b)/h`, which
//! keeps the normal equations well conditioned for any bandwidth;
//! coefficients are converted back to `(x − b)` powers on output.

use crate::error::{Error, Result};
use crate::linalg::cholesky_spd;
use crate::model::{Arm, RddDataset};
use crate::Z_975;

/// Kernel shape for the LLR weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LlrKernel {
    /// Weight 1 for `|u| ≤ 1`, else 0.
    Rectangular,
    /// Weight `max(0, 1 − |u|)`.
    Triangular,
}

impl LlrKernel {
    pub fn weight(&self, u: f64) -> f64 {
        match self {
            LlrKernel::Rectangular => {
                if u.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LlrKernel::Triangular => (1.0 - u.abs()).max(0.0),
        }
    }
}

/// One arm's weighted polynomial fit.
#[derive(Debug, Clone)]
pub struct LlrArmFit {
    /// Fitted value at the boundary.
    pub mu_hat: f64,
    /// Polynomial coefficients in powers of `(x − b)`, constant first.
    pub coefficients: Vec<f64>,
    /// HC1 sandwich variance of `mu_hat`.
    pub variance: f64,
    /// Number of observations with nonzero weight.
    pub effective_n: usize,
}

/// Treatment-effect fit from two arm regressions.
#[derive(Debug, Clone)]
pub struct LlrFit {
    pub tau_hat: f64,
    pub se: f64,
    /// 95% confidence interval `τ̂ ± 1.96·se`.
    pub ci: (f64, f64),
    pub bandwidth: f64,
    pub treatment: LlrArmFit,
    pub control: LlrArmFit,
}

/// Core WLS solver in scaled units. `us` are `(x − b)/h` (or any centered
/// scaled coordinate), `ws` the kernel weights. Returns coefficients in
/// the scaled basis plus the HC1 variance of the constant term.
fn wls_boundary(us: &[f64], ys: &[f64], ws: &[f64], q: usize) -> Result<(Vec<f64>, f64, usize)> {
    let idx: Vec<usize> = (0..us.len()).filter(|&i| ws[i] > 0.0).collect();
    let nw = idx.len();
    if nw < q {
        return Err(Error::InsufficientSupport(format!(
            "local fit of order {} needs {} weighted points, got {}",
            q - 1,
            q,
            nw
        )));
    }
    let row = |u: f64| -> Vec<f64> {
        let mut r = Vec::with_capacity(q);
        let mut p = 1.0;
        for _ in 0..q {
            r.push(p);
            p *= u;
        }
        r
    };

    let mut m = faer::Mat::<f64>::zeros(q, q);
    let mut c = vec![0.0; q];
    for &i in &idx {
        let r = row(us[i]);
        let w = ws[i];
        for a in 0..q {
            for b in 0..q {
                m[(a, b)] += w * r[a] * r[b];
            }
            c[a] += w * r[a] * ys[i];
        }
    }
    // No jitter rescue here: a design the plain factorization rejects is
    // rank-deficient for fitting purposes.
    let chol = cholesky_spd(&m, 0.0, 0.0).map_err(|_| {
        Error::InsufficientSupport("weighted design is rank-deficient".into())
    })?;
    let beta = chol.solve(&c);

    // HC1 sandwich for the prediction at u = 0 (the constant term):
    // M⁻¹ (Σ w_i² e_i² r_i r_iᵀ) M⁻¹, scaled by n_w/(n_w − q).
    let mut meat = faer::Mat::<f64>::zeros(q, q);
    for &i in &idx {
        let r = row(us[i]);
        let fit: f64 = (0..q).map(|a| beta[a] * r[a]).sum();
        let we = ws[i] * (ys[i] - fit);
        for a in 0..q {
            for b in 0..q {
                meat[(a, b)] += we * we * r[a] * r[b];
            }
        }
    }
    let minv_meat = chol.solve_mat(&meat);
    // var(β̂₀) = (M⁻¹ S M⁻¹)₀₀ = Σ_a (M⁻¹e₀)_a (M⁻¹S)₀ₐ, using that both
    // factors are symmetric.
    let e0 = faer::Mat::from_fn(q, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let minv_e0 = chol.solve_mat(&e0);
    let mut var0 = 0.0;
    for a in 0..q {
        var0 += minv_e0[(a, 0)] * minv_meat[(0, a)];
    }
    let dof_factor = if nw > q { nw as f64 / (nw - q) as f64 } else { 1.0 };
    Ok((beta, (var0 * dof_factor).max(0.0), nw))
}

/// Weighted polynomial fit of one arm at the boundary.
///
/// # Errors
/// [`Error::InsufficientSupport`] if fewer than `poly_order + 1` points
/// carry weight or the weighted design is rank-deficient;
/// [`Error::InvalidParameter`] for a nonpositive bandwidth.
pub fn llr_arm_estimate(
    data: &RddDataset,
    arm: Arm,
    h: f64,
    kernel: LlrKernel,
    poly_order: usize,
) -> Result<LlrArmFit> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    let b = data.boundary();
    let (xs, ys) = data.arm_xy(arm);
    let us: Vec<f64> = xs.iter().map(|&x| (x - b) / h).collect();
    let ws: Vec<f64> = us.iter().map(|&u| kernel.weight(u)).collect();
    let q = poly_order + 1;
    let (beta_u, variance, effective_n) = wls_boundary(&us, &ys, &ws, q)?;

    // u^j coefficients → (x − b)^j coefficients.
    let coefficients: Vec<f64> = beta_u
        .iter()
        .enumerate()
        .map(|(j, &bj)| bj / h.powi(j as i32))
        .collect();
    Ok(LlrArmFit { mu_hat: beta_u[0], coefficients, variance, effective_n })
}

/// LLR treatment-effect estimate: difference of boundary predictions,
/// variance the sum of the two arm variances, 95% normal interval.
pub fn llr_tau(data: &RddDataset, h: f64, kernel: LlrKernel, poly_order: usize) -> Result<LlrFit> {
    let treatment = llr_arm_estimate(data, Arm::Treatment, h, kernel, poly_order)?;
    let control = llr_arm_estimate(data, Arm::Control, h, kernel, poly_order)?;
    let tau_hat = treatment.mu_hat - control.mu_hat;
    let se = (treatment.variance + control.variance).sqrt();
    Ok(LlrFit {
        tau_hat,
        se,
        ci: (tau_hat - Z_975 * se, tau_hat + Z_975 * se),
        bandwidth: h,
        treatment,
        control,
    })
}

/// Leave-one-out cross-validation bandwidth.
///
/// For each arm, the half of the arm's points nearest the boundary serve
/// as evaluation points. Each is predicted by a local linear fit using
/// only observations strictly farther from the boundary than the point
/// itself (so every prediction extrapolates toward the boundary, the task
/// the bandwidth will actually be used for), kernel-weighted within `h` of
/// it. The criterion is the summed squared prediction error over both
/// arms; a bandwidth that cannot predict every evaluation point is
/// infeasible. Ties go to the larger bandwidth.
///
/// # Errors
/// [`Error::InvalidParameter`] for an empty or nonpositive grid;
/// [`Error::InsufficientSupport`] if every grid bandwidth is infeasible.
pub fn select_bandwidth_cv(data: &RddDataset, kernel: LlrKernel, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&h| !(h.is_finite() && h > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth grid entries must be positive, got {bad}"
        )));
    }
    let mut hs = grid.to_vec();
    hs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    hs.dedup();

    let b = data.boundary();
    // (evaluation x, y, fitting xs, fitting ys) per point; the fitting set
    // is the strictly-farther-from-b remainder of the arm.
    let mut tasks: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for arm in Arm::BOTH {
        let (xs, ys) = data.arm_xy(arm);
        if xs.is_empty() {
            return Err(Error::EmptyArm(arm));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        // Sort by distance to the boundary, nearest first.
        order.sort_by(|&i, &j| {
            (xs[i] - b)
                .abs()
                .partial_cmp(&(xs[j] - b).abs())
                .expect("finite x")
        });
        let n_eval = (xs.len() / 2).max(1);
        for &i in order.iter().take(n_eval) {
            let di = (xs[i] - b).abs();
            let mut fx = Vec::new();
            let mut fy = Vec::new();
            for j in 0..xs.len() {
                if (xs[j] - b).abs() > di {
                    fx.push(xs[j]);
                    fy.push(ys[j]);
                }
            }
            tasks.push((xs[i], ys[i], fx, fy));
        }
    }

    let mut best: Option<(f64, f64)> = None;
    for &h in &hs {
        let mut score = 0.0;
        let mut feasible = true;
        for (x0, y0, fx, fy) in &tasks {
            let us: Vec<f64> = fx.iter().map(|&x| (x - x0) / h).collect();
            let ws: Vec<f64> = us.iter().map(|&u| kernel.weight(u)).collect();
            match wls_boundary(&us, fy, &ws, 2) {
                Ok((beta, _, _)) => score += (y0 - beta[0]) * (y0 - beta[0]),
                Err(_) => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|&(s, _)| score <= s) {
            best = Some((score, h));
        }
    }
    best.map(|(_, h)| h).ok_or_else(|| {
        Error::InsufficientSupport("no grid bandwidth admits a one-sided fit at every evaluation point".into())
    })
}

/// Default geometric bandwidth grid: 12 points spanning a twentieth of the
/// running-variable range up to the full range.
pub fn default_bandwidth_grid(data: &RddDataset) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in data.x() {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let range = if hi > lo { hi - lo } else { 1.0 };
    let n = 12;
    (0..n)
        .map(|i| range * 0.05f64 * (20.0f64).powf(i as f64 / (n - 1) as f64))
        .collect()
}
