//! Analysis settings, resolved in three layers: built-in defaults, then an
//! optional TOML config file, then command-line flags (flags win).

use std::collections::BTreeMap;
use std::path::Path;

use rdgp::model::Assumption;

use crate::error::{CliError, CliResult};

/// Estimator selector for `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CliMethod {
    Gpr,
    GprCut,
    GprMle,
    Llr,
}

impl CliMethod {
    pub fn name(self) -> &'static str {
        match self {
            CliMethod::Gpr => "gpr",
            CliMethod::GprCut => "gpr-cut",
            CliMethod::GprMle => "gpr-mle",
            CliMethod::Llr => "llr",
        }
    }
}

/// Covariance assumption, as spelled on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionOpt {
    SameCov,
    Stationary,
}

impl AssumptionOpt {
    pub fn to_model(self) -> Assumption {
        match self {
            AssumptionOpt::SameCov => Assumption::SameCovariance,
            AssumptionOpt::Stationary => Assumption::Stationary,
        }
    }
}

/// Fully resolved settings for `fit` (and the sampler settings shared by
/// the other commands).
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub boundary: f64,
    pub method: CliMethod,
    pub assumption: AssumptionOpt,
    pub mean_order: usize,
    pub prior_beta_sd: f64,
    pub prior_hc_scale: f64,
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
    pub seed: u64,
    pub group_by_running: bool,
    /// Offset added to the running variable of every row in the cohort.
    pub shifts: BTreeMap<String, f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            boundary: 0.0,
            method: CliMethod::Gpr,
            assumption: AssumptionOpt::SameCov,
            mean_order: 2,
            prior_beta_sd: 100.0,
            prior_hc_scale: 5.0,
            chains: 4,
            iters: 2000,
            warmup: 1000,
            seed: 0,
            group_by_running: false,
            shifts: BTreeMap::new(),
        }
    }
}

impl AnalysisConfig {
    /// Early validation so bad settings fail with a configuration exit
    /// code instead of surfacing mid-fit.
    pub fn validate(&self) -> CliResult<()> {
        if !self.boundary.is_finite() {
            return Err(CliError::config(format!("boundary must be finite, got {}", self.boundary)));
        }
        for (name, v) in [("prior-beta-sd", self.prior_beta_sd), ("prior-hc-scale", self.prior_hc_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.chains == 0 {
            return Err(CliError::config("chains must be at least 1"));
        }
        if self.iters <= self.warmup {
            return Err(CliError::config(format!(
                "iters ({}) must exceed warmup ({})",
                self.iters, self.warmup
            )));
        }
        for (cohort, offset) in &self.shifts {
            if !offset.is_finite() {
                return Err(CliError::config(format!(
                    "shift for cohort `{cohort}` must be finite, got {offset}"
                )));
            }
        }
        Ok(())
    }
}

/// Config-file schema: every key optional, unknown keys rejected so typos
/// surface instead of silently falling back to defaults. One file serves
/// all subcommands; keys a command does not use are ignored by it.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub boundary: Option<f64>,
    pub method: Option<CliMethod>,
    pub assumption: Option<AssumptionOpt>,
    pub mean_order: Option<usize>,
    pub prior_beta_sd: Option<f64>,
    pub prior_hc_scale: Option<f64>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub warmup: Option<usize>,
    pub seed: Option<u64>,
    pub group_by_running: Option<bool>,
    pub shifts: Option<BTreeMap<String, f64>>,
    // `simulate` keys.
    pub dgps: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub parallelism: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config file {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid config file {}: {e}", path.display())))
}

/// Shift table CSV: header `cohort,offset`, one row per cohort.
pub fn load_shift_table(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(format!("cannot read shift table {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::config(format!("shift table {}: {e}", path.display())))?;
    if headers.len() != 2 || &headers[0] != "cohort" || &headers[1] != "offset" {
        return Err(CliError::config(format!(
            "shift table {} must have header `cohort,offset`",
            path.display()
        )));
    }
    let mut shifts = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| CliError::config(format!("shift table line {line}: {e}")))?;
        if record.len() != 2 {
            return Err(CliError::config(format!(
                "shift table line {line}: expected 2 fields, got {}",
                record.len()
            )));
        }
        let offset: f64 = record[1].parse().map_err(|_| {
            CliError::config(format!("shift table line {line}: offset `{}` is not a number", &record[1]))
        })?;
        if shifts.insert(record[0].to_string(), offset).is_some() {
            return Err(CliError::config(format!(
                "shift table line {line}: duplicate cohort `{}`",
                &record[0]
            )));
        }
    }
    Ok(shifts)
}
