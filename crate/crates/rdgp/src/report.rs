//! Campaign reports on disk: a flat CSV for spreadsheets and a JSON
//! mirror carrying the campaign settings. Writes go through a temp file
//! in the destination directory plus a rename, so a crash mid-write
//! never leaves a truncated report behind.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Column order of the CSV reports.
pub const CSV_HEADER: &str = "dgp,method,reps,ec,mean_il,bias,rmse,failures,seed";

/// One (design, method) cell. `reps` counts the replications that
/// produced an estimate; `failures` the ones that errored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dgp: String,
    pub method: String,
    pub reps: usize,
    pub ec: f64,
    pub mean_il: f64,
    pub bias: f64,
    pub rmse: f64,
    pub failures: usize,
    pub seed: u64,
}

/// A campaign's results plus the settings needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialize the rows as CSV. Values are written at full precision so
/// that a written report reads back exactly.
pub fn report_to_csv(report: &SimulationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        w.serialize(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
}

pub fn write_report_csv(report: &SimulationReport, path: &Path) -> Result<()> {
    write_atomic(path, report_to_csv(report)?.as_bytes())
}

pub fn write_report_json(report: &SimulationReport, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut rows = Vec::new();
    for record in r.deserialize() {
        rows.push(record.map_err(csv_error)?);
    }
    Ok(rows)
}

pub fn read_report_json(path: &Path) -> Result<SimulationReport> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        line: e.line(),
        field: "json".into(),
        message: e.to_string(),
    })
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line() as usize,
            field: "csv".into(),
            message: e.to_string(),
        },
        None => Error::InvalidParameter(e.to_string()),
    }
}

/// Render with `digits` significant digits for console display (files
/// always carry full precision).
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits > 0, "need at least one significant digit");
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
