//! CSV ingestion. Schema: `running,outcome1[,outcome2,...][,cohort]` with
//! a header row; the first column is the running variable under any name,
//! a final column named `cohort` (case-insensitive) is the shift key, and
//! everything in between is one outcome each.
//!
//! Processing order matters: per-cohort offsets are added to the running
//! variable first, grouping (when requested) then averages each outcome
//! over rows sharing a shifted running value, and the sharp rule
//! `w = 1[x ≥ b]` is applied by the dataset constructor.

use std::path::Path;

use rdgp::model::{Arm, RddDataset};

use crate::config::AnalysisConfig;
use crate::error::{in_stage, CliError, CliResult, Stage};

/// One dataset per outcome column, in column order.
#[derive(Debug)]
pub struct IngestedData {
    pub outcomes: Vec<String>,
    pub datasets: Vec<RddDataset>,
    /// Data rows read (header excluded).
    pub rows: usize,
    /// Distinct running values after grouping; `None` when not grouped.
    pub groups: Option<usize>,
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> CliError {
    in_stage(Stage::Input)(rdgp::Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    })
}

fn parse_finite(raw: &str, line: usize, field: &str) -> CliResult<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(line, field, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, field, format!("`{raw}` is not finite")));
    }
    Ok(v)
}

pub fn ingest_csv(path: &Path, cfg: &AnalysisConfig) -> CliResult<IngestedData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();

    let columns: Vec<String> = headers.iter().map(str::to_string).collect();
    if let Some(pos) = columns.iter().position(|c| c.eq_ignore_ascii_case("cohort")) {
        if pos + 1 != columns.len() {
            return Err(parse_err(1, &columns[pos], "cohort must be the last column"));
        }
    }
    let has_cohort = columns.last().is_some_and(|c| c.eq_ignore_ascii_case("cohort"));
    let n_outcomes = columns.len().saturating_sub(1 + usize::from(has_cohort));
    if columns.is_empty() || n_outcomes == 0 {
        return Err(parse_err(1, "header", "need a running column and at least one outcome column"));
    }
    let running_name = columns[0].clone();
    let outcomes: Vec<String> = columns[1..1 + n_outcomes].to_vec();
    for (i, name) in outcomes.iter().enumerate() {
        if outcomes[..i].contains(name) {
            return Err(parse_err(1, name, "duplicate outcome column"));
        }
    }
    if !cfg.shifts.is_empty() && !has_cohort {
        return Err(parse_err(1, "header", "shifts were configured but there is no cohort column"));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); n_outcomes];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map_or(0, |p| usize::try_from(p.line()).unwrap_or(usize::MAX));
            parse_err(line, &running_name, e.to_string())
        })?;
        let line = record
            .position()
            .map_or(0, |p| usize::try_from(p.line()).unwrap_or(usize::MAX));
        if record.len() != columns.len() {
            return Err(parse_err(
                line,
                &running_name,
                format!("expected {} fields, got {}", columns.len(), record.len()),
            ));
        }
        let mut x = parse_finite(&record[0], line, &running_name)?;
        if has_cohort {
            let cohort = &record[columns.len() - 1];
            x += cfg.shifts.get(cohort).copied().unwrap_or(0.0);
        }
        xs.push(x);
        for (k, column) in outcomes.iter().enumerate() {
            ys[k].push(parse_finite(&record[1 + k], line, column)?);
        }
    }
    let rows = xs.len();
    if rows == 0 {
        return Err(parse_err(1, &running_name, "no data rows"));
    }

    let groups = if cfg.group_by_running {
        let (gx, gy) = group_by_running(&xs, &ys);
        xs = gx;
        ys = gy;
        Some(xs.len())
    } else {
        None
    };

    let mut datasets = Vec::with_capacity(n_outcomes);
    for y in ys {
        let data = RddDataset::new(xs.clone(), y, cfg.boundary).map_err(in_stage(Stage::Input))?;
        for arm in [Arm::Control, Arm::Treatment] {
            if data.arm_count(arm) == 0 {
                return Err(in_stage(Stage::Input)(rdgp::Error::EmptyArm(arm)));
            }
        }
        datasets.push(data);
    }
    Ok(IngestedData { outcomes, datasets, rows, groups })
}

/// Unweighted mean of every outcome over rows sharing a running value
/// (exact f64 equality: equal decimal strings parse to identical floats).
fn group_by_running(xs: &[f64], ys: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut gx = Vec::new();
    let mut gy: Vec<Vec<f64>> = vec![Vec::new(); ys.len()];
    let mut i = 0;
    while i < order.len() {
        let x = xs[order[i]];
        let mut j = i;
        while j < order.len() && xs[order[j]] == x {
            j += 1;
        }
        gx.push(x);
        let m = (j - i) as f64;
        for (k, column) in ys.iter().enumerate() {
            gy[k].push(order[i..j].iter().map(|&r| column[r]).sum::<f64>() / m);
        }
        i = j;
    }
    (gx, gy)
}
