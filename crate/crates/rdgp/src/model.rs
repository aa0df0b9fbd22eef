//! Sharp-RDD datasets and the fixed-parameter posterior of the treatment
//! effect.
//!
//! A sharp design assigns treatment by the rule `w_i = 1 iff x_i ≥ b`. Each
//! arm gets its own GP — the arms share no information beyond (optionally)
//! the kernel parameter values — so the posterior of
//! `τ = μ_T(b) − μ_C(b)` at fixed parameters is the difference of two
//! independent arm posteriors evaluated at the boundary:
//!
//! ```text
//! τ | data ~ N(mean_T − mean_C, var_T + var_C)
//! ```
//!
//! Two covariance assumptions are supported: *SameCovariance* (one shared
//! `(ℓ, σ²_GP, σ²_y)`) and *Stationary* (a separate triple per arm).

use crate::error::{Error, Result};
use crate::gp::{gp_conditional, GpConditional};
use crate::kernel::{basis_row, gram_matrix, KernelParams, MeanBasis};
use crate::linalg::{cholesky_spd, dot};

/// Side of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Arm {
    Treatment,
    Control,
}

impl Arm {
    /// Both arms, treatment first.
    pub const BOTH: [Arm; 2] = [Arm::Treatment, Arm::Control];
}

/// Covariance-sharing assumption across arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Assumption {
    /// Both arms share one kernel parameterization (the analog of a single
    /// shared LLR bandwidth).
    SameCovariance,
    /// Each arm has its own constant kernel parameters.
    Stationary,
}

/// Kernel parameters under a chosen assumption.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum KernelSpec {
    SameCovariance(KernelParams),
    Stationary {
        treatment: KernelParams,
        control: KernelParams,
    },
}

impl KernelSpec {
    /// The kernel governing one arm.
    pub fn for_arm(&self, arm: Arm) -> &KernelParams {
        match self {
            KernelSpec::SameCovariance(k) => k,
            KernelSpec::Stationary { treatment, control } => match arm {
                Arm::Treatment => treatment,
                Arm::Control => control,
            },
        }
    }

    /// Which assumption this parameterization belongs to.
    pub fn assumption(&self) -> Assumption {
        match self {
            KernelSpec::SameCovariance(_) => Assumption::SameCovariance,
            KernelSpec::Stationary { .. } => Assumption::Stationary,
        }
    }
}

/// A fully parameterized two-arm model: kernels plus per-arm mean functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kernels: KernelSpec,
    pub mean_treatment: MeanBasis,
    pub mean_control: MeanBasis,
}

impl ModelSpec {
    /// The mean function of one arm.
    pub fn mean_for(&self, arm: Arm) -> &MeanBasis {
        match arm {
            Arm::Treatment => &self.mean_treatment,
            Arm::Control => &self.mean_control,
        }
    }
}

/// Observations for a sharp RDD: running variable, response, boundary, and
/// the derived assignment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RddDataset {
    x: Vec<f64>,
    y: Vec<f64>,
    b: f64,
    w: Vec<bool>,
}

impl RddDataset {
    /// Build a dataset, deriving `w_i = x_i ≥ b` (units exactly at the
    /// boundary are treated).
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] for length mismatch or non-finite values.
    pub fn new(x: Vec<f64>, y: Vec<f64>, b: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "x and y must have equal length, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("boundary must be finite, got {b}")));
        }
        if let Some(bad) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "data values must be finite, got {bad}"
            )));
        }
        let w = x.iter().map(|&xi| xi >= b).collect();
        Ok(RddDataset { x, y, b, w })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn boundary(&self) -> f64 {
        self.b
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Sharp assignment indicators (`true` = treated).
    pub fn w(&self) -> &[bool] {
        &self.w
    }

    /// Number of observations in an arm.
    pub fn arm_count(&self, arm: Arm) -> usize {
        let treated = arm == Arm::Treatment;
        self.w.iter().filter(|&&w| w == treated).count()
    }

    /// Copies of one arm's `(x, y)`, in dataset order.
    pub fn arm_xy(&self, arm: Arm) -> (Vec<f64>, Vec<f64>) {
        let treated = arm == Arm::Treatment;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..self.x.len() {
            if self.w[i] == treated {
                xs.push(self.x[i]);
                ys.push(self.y[i]);
            }
        }
        (xs, ys)
    }

    /// The subset with `lo ≤ x ≤ hi` (used by the Cut variant). The boundary
    /// is unchanged.
    ///
    /// # Errors
    /// [`Error::InsufficientSupport`] if the window empties either side.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<RddDataset> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..self.x.len() {
            if self.x[i] >= lo && self.x[i] <= hi {
                x.push(self.x[i]);
                y.push(self.y[i]);
            }
        }
        let out = RddDataset::new(x, y, self.b)?;
        for arm in Arm::BOTH {
            if out.arm_count(arm) == 0 {
                return Err(Error::InsufficientSupport(format!(
                    "window [{lo}, {hi}] leaves no {arm:?} observations"
                )));
            }
        }
        Ok(out)
    }
}

/// Fixed-parameter posterior of `τ` at the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauConditional {
    /// `mean_T(b) − mean_C(b)`.
    pub mean: f64,
    /// `var_T(b) + var_C(b)`; may undershoot zero only by jitter tolerance.
    pub variance: f64,
}

/// Conditional posterior of `μ_arm(b)` from that arm's data alone.
///
/// Definitionally equal to [`gp_conditional`] on the arm subset with the
/// arm's kernel and mean, queried at the boundary.
///
/// # Errors
/// [`Error::EmptyArm`] if the arm has no observations; factorization errors
/// propagate.
pub fn arm_posterior(data: &RddDataset, spec: &ModelSpec, arm: Arm) -> Result<GpConditional> {
    let (xs, ys) = data.arm_xy(arm);
    if xs.is_empty() {
        return Err(Error::EmptyArm(arm));
    }
    gp_conditional(&xs, &ys, spec.mean_for(arm), spec.kernels.for_arm(arm), data.boundary())
}

/// Fixed-parameter posterior of the treatment effect
/// `τ = μ_T(b) − μ_C(b)`: difference of arm means, sum of arm variances
/// (the arm processes are independent a priori).
///
/// # Errors
/// As for [`arm_posterior`], on either arm.
pub fn tau_conditional(data: &RddDataset, spec: &ModelSpec) -> Result<TauConditional> {
    let t = arm_posterior(data, spec, Arm::Treatment)?;
    let c = arm_posterior(data, spec, Arm::Control)?;
    Ok(TauConditional {
        mean: t.mean - c.mean,
        variance: t.variance + c.variance,
    })
}

/// Generalized-least-squares fit of a `p`-coefficient polynomial mean under
/// a GP covariance: `β̂ = (Hᵀ A⁻¹ H)⁻¹ Hᵀ A⁻¹ y` with `A = K + σ²_y I`.
///
/// This is the exact profile maximizer of the marginal log-likelihood over
/// `β` at fixed kernel parameters; the MLE variant and the mean-shift
/// equivariance of `τ` both rest on it.
///
/// Collinear designs (duplicated inputs) are tolerated: the normal
/// equations get the standard jitter ladder, which acts as a faint ridge
/// on the unidentified directions.
///
/// # Errors
/// [`Error::InsufficientSupport`] when `p` exceeds the number of points or
/// the normal system is singular past the jitter ladder; factorization
/// errors on the Gram matrix propagate.
pub fn fit_mean_gls(xs: &[f64], ys: &[f64], p: usize, k: &KernelParams) -> Result<MeanBasis> {
    if p == 0 {
        return Ok(MeanBasis::zero());
    }
    let n = xs.len();
    if n < p {
        return Err(Error::InsufficientSupport(format!(
            "GLS mean fit needs at least {p} points, got {n}"
        )));
    }
    let a = gram_matrix(xs, k, true);
    let chol = cholesky_spd(&a, k.variance, crate::kernel::base_jitter(k))?;
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
    let mchol = cholesky_spd(&m, scale, 0.0).map_err(|_| {
        Error::InsufficientSupport("GLS normal equations are singular".into())
    })?;
    MeanBasis::new(mchol.solve(&rhs))
}

/// Convenience: `hᵀ(b)·β` gap implied by two mean bases at the boundary.
pub fn mean_gap_at(b: f64, mean_t: &MeanBasis, mean_c: &MeanBasis) -> f64 {
    let p = mean_t.order().max(mean_c.order());
    let h = basis_row(b, p);
    let ht = &h[..mean_t.order()];
    let hc = &h[..mean_c.order()];
    dot(ht, mean_t.coefficients()) - dot(hc, mean_c.coefficients())
}
