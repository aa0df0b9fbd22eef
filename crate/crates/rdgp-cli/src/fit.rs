//! `fit`: estimate the boundary treatment effect for every outcome column
//! and emit a text table, CSV/JSON reports, and one SVG of the fitted arm
//! curves per outcome.

use std::path::{Path, PathBuf};

use rdgp::bayes::{fit_gpr, FitSpec, McmcConfig};
use rdgp::gp::gp_conditional;
use rdgp::ik::select_bandwidth_ik;
use rdgp::llr::{default_bandwidth_grid, llr_tau, select_bandwidth_cv, LlrKernel};
use rdgp::model::{Arm, RddDataset};
use rdgp::prior::PriorSpec;
use rdgp::report::format_sig;
use rdgp::Z_975;

use crate::config::{AnalysisConfig, CliMethod};
use crate::error::{in_stage, CliResult, Stage};
use crate::ingest::IngestedData;
use crate::output::{ensure_out_dir, out_path, slug, write_atomic, OutputFormat};
use crate::svg;

#[derive(Debug, Clone, serde::Serialize)]
pub struct CurveOut {
    pub arm: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    /// Pointwise 95% band. `None` for LLR, whose sandwich variance is
    /// defined only at the boundary.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OutcomeFit {
    pub outcome: String,
    pub method: String,
    pub tau_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant: bool,
    /// Window half-width actually used (LLR and the cut posterior).
    pub bandwidth: Option<f64>,
    pub curves: Vec<CurveOut>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitReport {
    pub boundary: f64,
    pub fits: Vec<OutcomeFit>,
}

/// The emitted flag is always this function of the emitted endpoints.
pub fn is_significant(lower: f64, upper: f64) -> bool {
    lower > 0.0 || upper < 0.0
}

fn arm_name(arm: Arm) -> &'static str {
    match arm {
        Arm::Control => "control",
        Arm::Treatment => "treatment",
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let mut xs: Vec<f64> =
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    xs[n - 1] = b;
    xs
}

fn x_range(data: &RddDataset) -> (f64, f64) {
    let lo = data.x().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.x().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn posterior_curves(curves: Vec<rdgp::bayes::ArmCurve>) -> Vec<CurveOut> {
    curves
        .into_iter()
        .map(|c| CurveOut {
            arm: arm_name(c.arm).to_string(),
            x: c.x,
            mean: c.mean,
            lower: Some(c.lower),
            upper: Some(c.upper),
        })
        .collect()
}

pub fn fit_dataset(
    cfg: &AnalysisConfig,
    outcome: &str,
    data: &RddDataset,
) -> CliResult<OutcomeFit> {
    let est = in_stage(Stage::Estimation);
    let spec = FitSpec { assumption: cfg.assumption.to_model(), mean_order: cfg.mean_order };
    let priors = PriorSpec {
        beta_sd: cfg.prior_beta_sd,
        hc_scale: cfg.prior_hc_scale,
        ..Default::default()
    };
    let mcmc = McmcConfig {
        chains: cfg.chains,
        iters: cfg.iters,
        warmup: cfg.warmup,
        seed: cfg.seed,
        ..Default::default()
    };
    let b = data.boundary();
    let (x_lo, x_hi) = x_range(data);

    let (tau_hat, interval, bandwidth, curves) = match cfg.method {
        CliMethod::Gpr => {
            let grid = linspace(x_lo, x_hi, 101);
            let fit = fit_gpr(data, &spec, &priors, &mcmc, Some(&grid)).map_err(&est)?;
            (fit.tau.point_estimate, fit.tau.interval, None, posterior_curves(fit.curves))
        }
        CliMethod::GprCut => {
            let h = select_bandwidth_ik(data, LlrKernel::Rectangular).map_err(&est)?;
            let cut = data.restrict(b - h, b + h).map_err(&est)?;
            let (lo, hi) = x_range(&cut);
            let grid = linspace(lo, hi, 101);
            let fit = fit_gpr(&cut, &spec, &priors, &mcmc, Some(&grid)).map_err(&est)?;
            (fit.tau.point_estimate, fit.tau.interval, Some(h), posterior_curves(fit.curves))
        }
        CliMethod::GprMle => {
            let fit = rdgp::mle::mle_tau(data, &spec).map_err(&est)?;
            let model = fit.estimate.model_spec();
            let mut curves = Vec::with_capacity(2);
            for arm in [Arm::Control, Arm::Treatment] {
                let (axs, ays) = data.arm_xy(arm);
                let grid = match arm {
                    Arm::Control => linspace(x_lo, b, 51),
                    Arm::Treatment => linspace(b, x_hi, 51),
                };
                let mut mean = Vec::with_capacity(grid.len());
                let mut lower = Vec::with_capacity(grid.len());
                let mut upper = Vec::with_capacity(grid.len());
                for &g in &grid {
                    let c = gp_conditional(
                        &axs,
                        &ays,
                        model.mean_for(arm),
                        model.kernels.for_arm(arm),
                        g,
                    )
                    .map_err(&est)?;
                    let half = Z_975 * c.variance.max(0.0).sqrt();
                    mean.push(c.mean);
                    lower.push(c.mean - half);
                    upper.push(c.mean + half);
                }
                curves.push(CurveOut {
                    arm: arm_name(arm).to_string(),
                    x: grid,
                    mean,
                    lower: Some(lower),
                    upper: Some(upper),
                });
            }
            (fit.tau_hat, fit.interval, None, curves)
        }
        CliMethod::Llr => {
            let grid = default_bandwidth_grid(data);
            let h = select_bandwidth_cv(data, LlrKernel::Rectangular, &grid).map_err(&est)?;
            let fit = llr_tau(data, h, LlrKernel::Rectangular, 1).map_err(&est)?;
            let mut curves = Vec::with_capacity(2);
            for (arm, arm_fit) in
                [(Arm::Control, &fit.control), (Arm::Treatment, &fit.treatment)]
            {
                let grid = match arm {
                    Arm::Control => linspace(x_lo.max(b - h), b, 51),
                    Arm::Treatment => linspace(b, x_hi.min(b + h), 51),
                };
                let mean: Vec<f64> = grid
                    .iter()
                    .map(|&g| {
                        arm_fit
                            .coefficients
                            .iter()
                            .rev()
                            .fold(0.0, |acc, &c| acc * (g - b) + c)
                    })
                    .collect();
                curves.push(CurveOut {
                    arm: arm_name(arm).to_string(),
                    x: grid,
                    mean,
                    lower: None,
                    upper: None,
                });
            }
            (fit.tau_hat, fit.ci, Some(h), curves)
        }
    };

    Ok(OutcomeFit {
        outcome: outcome.to_string(),
        method: cfg.method.name().to_string(),
        tau_hat,
        lower: interval.0,
        upper: interval.1,
        significant: is_significant(interval.0, interval.1),
        bandwidth,
        curves,
    })
}

pub fn fit_report(cfg: &AnalysisConfig, data: &IngestedData) -> CliResult<FitReport> {
    let mut fits = Vec::with_capacity(data.datasets.len());
    for (outcome, dataset) in data.outcomes.iter().zip(&data.datasets) {
        fits.push(fit_dataset(cfg, outcome, dataset)?);
    }
    Ok(FitReport { boundary: cfg.boundary, fits })
}

/// Human-readable summary; every number at 6 significant digits.
pub fn render_text(report: &FitReport) -> String {
    let name_w = report
        .fits
        .iter()
        .map(|f| f.outcome.len())
        .chain(["outcome".len()])
        .max()
        .unwrap_or(7);
    let mut out = format!("boundary: {}\n", format_sig(report.boundary, 6));
    out.push_str(&format!(
        "{:<name_w$}  {:<7}  {:>12}  {:>28}  {:<11}  {}\n",
        "outcome", "method", "estimate", "95% interval", "significant", "bandwidth"
    ));
    for f in &report.fits {
        let interval = format!(
            "[{}, {}]",
            format_sig(f.lower, 6),
            format_sig(f.upper, 6)
        );
        out.push_str(&format!(
            "{:<name_w$}  {:<7}  {:>12}  {:>28}  {:<11}  {}\n",
            f.outcome,
            f.method,
            format_sig(f.tau_hat, 6),
            interval,
            if f.significant { "yes" } else { "no" },
            f.bandwidth.map_or_else(|| "-".to_string(), |h| format_sig(h, 6)),
        ));
    }
    out
}

/// Unrounded per-outcome estimates.
pub fn report_csv(report: &FitReport) -> String {
    let mut out = String::from("outcome,method,tau_hat,lower,upper,significant,bandwidth\n");
    for f in &report.fits {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.outcome,
            f.method,
            f.tau_hat,
            f.lower,
            f.upper,
            f.significant,
            f.bandwidth.map_or_else(String::new, |h| h.to_string()),
        ));
    }
    out
}

/// Unrounded fitted curves, one row per grid point.
pub fn curves_csv(report: &FitReport) -> String {
    let mut out = String::from("outcome,arm,x,mean,lower,upper\n");
    for f in &report.fits {
        for c in &f.curves {
            for (i, &x) in c.x.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    f.outcome,
                    c.arm,
                    x,
                    c.mean[i],
                    c.lower.as_ref().map_or_else(String::new, |v| v[i].to_string()),
                    c.upper.as_ref().map_or_else(String::new, |v| v[i].to_string()),
                ));
            }
        }
    }
    out
}

fn fit_svg(report: &FitReport, fit: &OutcomeFit, data: &RddDataset) -> String {
    let scatter: Vec<(f64, f64)> =
        data.x().iter().copied().zip(data.y().iter().copied()).collect();
    let mut series = Vec::new();
    for c in &fit.curves {
        let color = if c.arm == "control" { "#1f6fb2" } else { "#d95f02" };
        series.push(svg::Series {
            label: format!("{} mean", c.arm),
            color,
            dashed: false,
            markers: false,
            points: c.x.iter().copied().zip(c.mean.iter().copied()).collect(),
        });
        if let (Some(lower), Some(upper)) = (&c.lower, &c.upper) {
            for band in [lower, upper] {
                series.push(svg::Series {
                    label: String::new(),
                    color,
                    dashed: true,
                    markers: false,
                    points: c.x.iter().copied().zip(band.iter().copied()).collect(),
                });
            }
        }
    }
    svg::plot(
        &format!("{} ({})", fit.outcome, fit.method),
        "running variable",
        &fit.outcome,
        &scatter,
        &series,
        Some(report.boundary),
    )
}

pub fn write_fit_outputs(
    report: &FitReport,
    data: &IngestedData,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> CliResult<Vec<PathBuf>> {
    ensure_out_dir(out_dir)?;
    let mut written = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        write_atomic(&out_path(out_dir, "fit_report.csv", &mut written), report_csv(report).as_bytes())?;
        write_atomic(&out_path(out_dir, "fit_curves.csv", &mut written), curves_csv(report).as_bytes())?;
    }
    if formats.contains(&OutputFormat::Json) {
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| crate::error::CliError::output(format!("cannot serialize report: {e}")))?;
        write_atomic(
            &out_path(out_dir, "fit_report.json", &mut written),
            format!("{json}\n").as_bytes(),
        )?;
    }
    if formats.contains(&OutputFormat::Svg) {
        for (fit, dataset) in report.fits.iter().zip(&data.datasets) {
            let name = format!("fit_{}.svg", slug(&fit.outcome));
            write_atomic(
                &out_path(out_dir, &name, &mut written),
                fit_svg(report, fit, dataset).as_bytes(),
            )?;
        }
    }
    Ok(written)
}
