//! Command implementations behind the `rdgp` binary: CSV ingestion with
//! cohort alignment and per-running-value grouping, boundary-effect
//! fitting with report and plot emission, Monte Carlo campaigns, and
//! window diagnostics. The binary is a thin argument-parsing shell over
//! these functions so integration tests can drive them in-process.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod fit;
pub mod ingest;
pub mod output;
pub mod simulate;
pub mod svg;
