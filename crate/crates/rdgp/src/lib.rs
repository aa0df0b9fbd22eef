//! Gaussian-process regression for sharp regression discontinuity designs.
//!
//! A sharp RDD assigns treatment by thresholding a running variable at a
//! boundary `b`; the estimand is the jump `τ = μ_T(b) − μ_C(b)` in the
//! conditional mean response at `b`. This crate fits an independent GP with a
//! squared-exponential kernel and polynomial mean to each side of the
//! boundary, propagates hyperparameter uncertainty by MCMC, and reports the
//! posterior of `τ`. A local-linear-regression baseline, the
//! Imbens–Kalyanaraman plug-in bandwidth, and a seeded Monte Carlo harness
//! for coverage studies are included.
//!
//! Modules, bottom up:
//!
//! * [`linalg`] — Cholesky factorization with escalating diagonal jitter.
//! * [`kernel`] — squared-exponential kernel, Gram matrices, mean bases.
//! * [`gp`] — conditional GP posterior and marginal log-likelihood.
//! * [`model`] — RDD datasets and the fixed-parameter posterior of `τ`.
//! * [`prior`] — Normal and half-Cauchy prior densities.
//! * [`mcmc`] — adaptive random-walk Metropolis, split-R̂, ESS.
//! * [`bayes`] — full-Bayes posterior of `τ`; collapsed and joint samplers.
//! * [`mle`] — Nelder–Mead marginal-likelihood maximization, MLE plug-in fit.
//! * [`llr`] — local linear regression with kernel weights and robust SEs.
//! * [`ik`] — Imbens–Kalyanaraman plug-in bandwidth.
//! * [`dgp`] — simulation-study mean functions and data generation.
//! * [`sim`] — replication campaigns and coverage metrics.
//! * [`report`] — CSV/JSON report files and numeric formatting.

pub mod bayes;
pub mod dgp;
pub mod error;
pub mod gp;
pub mod ik;
pub mod kernel;
pub mod linalg;
pub mod llr;
pub mod mcmc;
pub mod mle;
pub mod model;
pub mod prior;
pub mod report;
pub mod sim;

pub use error::{Error, Result};

/// Standard-normal 97.5% quantile, for 95% two-sided intervals.
pub const Z_975: f64 = 1.959963984540054;
