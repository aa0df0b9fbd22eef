//! Output-file plumbing. Every artifact is written via a temp file in the
//! destination directory followed by an atomic rename, so a crashed or
//! interrupted run never leaves a half-written report behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Artifact format selector; each command documents which it supports and
/// writes all of its supported formats when none is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

pub fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::output(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let fail = |e: std::io::Error| CliError::output(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// File-name-safe version of an outcome column name.
pub fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        s.push('_');
    }
    s
}

/// Join and remember a written path; commands report every file they wrote.
pub fn out_path(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> PathBuf {
    let p = dir.join(name);
    written.push(p.clone());
    p
}
