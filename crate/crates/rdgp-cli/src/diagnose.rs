//! `diagnose`: curvature and window signal profiles around the boundary.
//!
//! Rows are window centers at `b ± (0.1, …, 0.9)`, the layout the
//! unit-domain benchmark designs use. For a named design both profiles
//! come straight from the library; for a noiseless CSV curve the
//! curvature is the quadratic-fit second derivative within each `±0.1`
//! window and the ratio is the windowed likelihood fit on the supplied
//! samples. Windows with fewer than five samples, or whose fit fails,
//! leave blank cells.

use std::path::{Path, PathBuf};

use rdgp::dgp::{second_derivative_profile, sliding_window_mle_ratio, Dgp};
use rdgp::mle::mle_arm;

use crate::error::{CliError, CliResult};
use crate::output::{ensure_out_dir, out_path, slug, write_atomic, OutputFormat};
use crate::svg;

const HALF_WIDTH: f64 = 0.1;
const MIN_WINDOW_POINTS: usize = 5;

#[derive(Debug)]
pub enum DiagnoseSource {
    Named(Dgp),
    Curve { path: PathBuf, boundary: f64 },
}

#[derive(Debug, Clone)]
pub struct DiagnosticsProfile {
    pub label: String,
    pub boundary: f64,
    pub centers: Vec<f64>,
    pub curvature: Vec<Option<f64>>,
    pub ratio: Vec<Option<f64>>,
}

/// Ascending centers, nine per side, skipping the boundary itself.
pub fn window_centers(b: f64) -> Vec<f64> {
    let mut cs = Vec::with_capacity(18);
    for i in (1..=9).rev() {
        cs.push(b - HALF_WIDTH * i as f64);
    }
    for i in 1..=9 {
        cs.push(b + HALF_WIDTH * i as f64);
    }
    cs
}

pub fn diagnose_profile(source: &DiagnoseSource) -> CliResult<DiagnosticsProfile> {
    match source {
        DiagnoseSource::Named(dgp) => {
            let centers = window_centers(0.0);
            let curvature =
                second_derivative_profile(*dgp, &centers).into_iter().map(Some).collect();
            let ratio = sliding_window_mle_ratio(*dgp, &centers);
            Ok(DiagnosticsProfile {
                label: dgp.name().to_string(),
                boundary: 0.0,
                centers,
                curvature,
                ratio,
            })
        }
        DiagnoseSource::Curve { path, boundary } => curve_profile(path, *boundary),
    }
}

fn curve_profile(path: &Path, boundary: f64) -> CliResult<DiagnosticsProfile> {
    let (xs, ys) = read_curve(path)?;
    let centers = window_centers(boundary);
    let mut curvature = Vec::with_capacity(centers.len());
    let mut ratio = Vec::with_capacity(centers.len());
    for &c in &centers {
        let window: Vec<(f64, f64)> = xs
            .iter()
            .zip(&ys)
            .filter(|(&x, _)| (x - c).abs() <= HALF_WIDTH)
            .map(|(&x, &y)| (x, y))
            .collect();
        if window.len() < MIN_WINDOW_POINTS {
            curvature.push(None);
            ratio.push(None);
            continue;
        }
        let wxs: Vec<f64> = window.iter().map(|&(x, _)| x).collect();
        let wys: Vec<f64> = window.iter().map(|&(_, y)| y).collect();
        curvature.push(quadratic_curvature(&wxs, &wys, c));
        ratio.push(mle_arm(&wxs, &wys, 2).ok().map(|(k, _, _)| k.variance.sqrt() / k.lengthscale));
    }
    let label = path
        .file_stem()
        .map_or_else(|| "curve".to_string(), |s| slug(&s.to_string_lossy()));
    Ok(DiagnosticsProfile { label, boundary, centers, curvature, ratio })
}

/// `|y″(c)| = |2a₂|` from the least-squares quadratic in `(x − c)`.
fn quadratic_curvature(xs: &[f64], ys: &[f64], c: f64) -> Option<f64> {
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x - c;
        let row = [1.0, u, u * u];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
            rhs[a] += row[a] * y;
        }
    }
    solve3(&mut m, &mut rhs).map(|beta| (2.0 * beta[2]).abs())
}

/// Gaussian elimination with partial pivoting; `None` on a singular
/// system (e.g. fewer than three distinct window abscissae).
fn solve3(m: &mut [[f64; 3]; 3], rhs: &mut [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for k in col..3 {
                m[r][k] -= f * m[col][k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut beta = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut v = rhs[r];
        for k in r + 1..3 {
            v -= m[r][k] * beta[k];
        }
        beta[r] = v / m[r][r];
    }
    Some(beta)
}

/// Noiseless curve CSV: header `x,y`, one sample per row.
fn read_curve(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if headers.len() != 2 {
        return Err(CliError::input(format!(
            "{}: curve CSV must have exactly two columns `x,y`",
            path.display()
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::input(format!("line {line}: {e}")))?;
        for (field, store) in [(&record[0], &mut xs), (&record[1], &mut ys)] {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::input(format!("line {line}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(CliError::input(format!("line {line}: `{field}` is not finite")));
            }
            store.push(v);
        }
    }
    if xs.len() < MIN_WINDOW_POINTS {
        return Err(CliError::input(format!(
            "{}: need at least {MIN_WINDOW_POINTS} curve samples",
            path.display()
        )));
    }
    Ok((xs, ys))
}

/// Unrounded profile rows; blank cells for invalid windows.
pub fn profile_csv(p: &DiagnosticsProfile) -> String {
    let mut out = String::from("center,abs_second_derivative,ratio\n");
    for (i, &c) in p.centers.iter().enumerate() {
        out.push_str(&format!(
            "{c},{},{}\n",
            p.curvature[i].map_or_else(String::new, |v| v.to_string()),
            p.ratio[i].map_or_else(String::new, |v| v.to_string()),
        ));
    }
    out
}

/// Overlay of the two profiles, each scaled by its own maximum so shapes
/// are comparable; the raw values live in the CSV.
fn profile_svg(p: &DiagnosticsProfile) -> String {
    let scaled = |vals: &[Option<f64>]| -> Vec<(f64, f64)> {
        let max = vals.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
        let scale = if max > 0.0 { max } else { 1.0 };
        let mut pts = Vec::new();
        for (i, (&c, v)) in p.centers.iter().zip(vals).enumerate() {
            // A gap between the two sides of the boundary.
            if i == p.centers.len() / 2 {
                pts.push((f64::NAN, f64::NAN));
            }
            pts.push((c, v.map_or(f64::NAN, |v| v / scale)));
        }
        pts
    };
    let series = [
        svg::Series {
            label: "|second derivative| (scaled to max 1)".to_string(),
            color: "#202020",
            dashed: false,
            markers: true,
            points: scaled(&p.curvature),
        },
        svg::Series {
            label: "signal sd / lengthscale (scaled to max 1)".to_string(),
            color: "#d95f02",
            dashed: false,
            markers: true,
            points: scaled(&p.ratio),
        },
    ];
    svg::plot(
        &format!("window diagnostics: {}", p.label),
        "window center",
        "scaled profile",
        &[],
        &series,
        Some(p.boundary),
    )
}

pub fn write_diagnose_outputs(
    p: &DiagnosticsProfile,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> CliResult<Vec<PathBuf>> {
    ensure_out_dir(out_dir)?;
    let mut written = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        let name = format!("diagnose_{}.csv", p.label);
        write_atomic(&out_path(out_dir, &name, &mut written), profile_csv(p).as_bytes())?;
    }
    if formats.contains(&OutputFormat::Svg) {
        let name = format!("diagnose_{}.svg", p.label);
        write_atomic(&out_path(out_dir, &name, &mut written), profile_svg(p).as_bytes())?;
    }
    Ok(written)
}
