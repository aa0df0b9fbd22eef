//! Error types shared across the crate.

use crate::model::Arm;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by model fitting, bandwidth selection, and the
/// simulation harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The noisy Gram matrix was not positive definite even after jitter
    /// escalation; typically caused by duplicated inputs with zero noise.
    #[error(
        "Cholesky factorization failed for a {n}×{n} system (last jitter tried: {last_jitter:e})"
    )]
    FactorizationFailure { n: usize, last_jitter: f64 },

    /// A model operation needed data in an arm that contains no points.
    #[error("no observations in the {0:?} arm")]
    EmptyArm(Arm),

    /// A fit or selector lacked enough usable points (rank-deficient weighted
    /// design, empty bandwidth window, empty candidate grid, ...).
    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    /// Every optimizer start failed, or the optimizer returned no finite
    /// objective value.
    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    /// A constructor was handed out-of-domain values (non-finite data,
    /// non-positive kernel parameters, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Malformed input data with its location.
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    /// More than the tolerated fraction of campaign replications failed.
    #[error(
        "simulation campaign failed: {failed} of {total} replications errored (tolerance 1%); \
         first failure: {first}"
    )]
    CampaignFailure {
        failed: usize,
        total: usize,
        first: String,
    },

    /// Filesystem or serialization failure while writing reports.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
