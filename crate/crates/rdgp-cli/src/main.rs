//! `rdgp` binary: argument parsing, config resolution, dispatch, and
//! exit-code mapping (see [`rdgp_cli::error`] for the code table).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use rdgp_cli::config::{
    load_file_config, load_shift_table, AnalysisConfig, AssumptionOpt, CliMethod, FileConfig,
};
use rdgp_cli::diagnose::{diagnose_profile, write_diagnose_outputs, DiagnoseSource};
use rdgp_cli::error::{CliError, CliResult};
use rdgp_cli::fit::{fit_report, render_text, write_fit_outputs};
use rdgp_cli::ingest::ingest_csv;
use rdgp_cli::output::OutputFormat;
use rdgp_cli::simulate::{render_summary, run_simulate, write_simulate_outputs, SimulateSettings};

#[derive(Parser)]
#[command(
    name = "rdgp",
    version,
    about = "Boundary discontinuity analysis: fit estimators to CSV data, \
             run simulation campaigns, and emit window diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the selected estimator to a CSV dataset (one fit per outcome column).
    Fit(FitArgs),
    /// Run a Monte Carlo campaign over the benchmark designs.
    Simulate(SimulateArgs),
    /// Emit curvature and window signal profiles around the boundary.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct OutputOpts {
    /// Directory output files are written into.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output formats (comma-separated). Defaults to every format the
    /// command supports: fit csv,json,svg; simulate csv,json; diagnose csv,svg.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<OutputFormat>,
}

#[derive(Args)]
struct SamplerOpts {
    /// MCMC chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Iterations per chain, warmup included.
    #[arg(long)]
    iters: Option<usize>,
    /// Warmup iterations discarded from each chain.
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV: `running,outcome…[,cohort]` with a header row.
    data: PathBuf,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Treatment boundary b (treated means running ≥ b).
    #[arg(long)]
    boundary: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<CliMethod>,
    #[arg(long, value_enum)]
    assumption: Option<AssumptionOpt>,
    /// Polynomial mean order p (0 = zero mean).
    #[arg(long)]
    mean_order: Option<usize>,
    /// Prior sd of the mean coefficients.
    #[arg(long)]
    prior_beta_sd: Option<f64>,
    /// Scale of the half-Cauchy hyperpriors.
    #[arg(long)]
    prior_hc_scale: Option<f64>,
    /// Average outcomes over rows sharing a running value.
    #[arg(long)]
    group_by_running: bool,
    /// CSV `cohort,offset` of running-variable shifts.
    #[arg(long)]
    shift_table: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark designs (comma-separated names); default: all seven.
    #[arg(long = "dgp", value_delimiter = ',')]
    dgps: Vec<String>,
    /// Methods (comma-separated); default: gpr,llr.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    /// Observations per replication.
    #[arg(long)]
    n: Option<usize>,
    /// Replications per (design, method) cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads (reports are identical at any value).
    #[arg(long)]
    parallelism: Option<usize>,
    #[command(flatten)]
    sampler: SamplerOpts,
    #[command(flatten)]
    output: OutputOpts,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DiagnoseSourceArgs {
    /// Benchmark design name.
    #[arg(long)]
    dgp: Option<String>,
    /// Noiseless curve CSV with header `x,y`.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: DiagnoseSourceArgs,
    /// Boundary for curve mode (named designs sit at 0).
    #[arg(long)]
    boundary: Option<f64>,
    /// TOML config file (used for `boundary` in curve mode).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputOpts,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Simulate(args) => run_simulate_cmd(args),
        Command::Diagnose(args) => run_diagnose(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}

/// Requested formats restricted to what the command can produce; empty
/// request means all of them.
fn resolve_formats(requested: &[OutputFormat], supported: &[OutputFormat]) -> CliResult<Vec<OutputFormat>> {
    if requested.is_empty() {
        return Ok(supported.to_vec());
    }
    for f in requested {
        if !supported.contains(f) {
            return Err(CliError::config(format!(
                "{f:?} output is not available for this command"
            )));
        }
    }
    Ok(requested.to_vec())
}

fn resolve_analysis(args: &FitArgs, file: &FileConfig) -> CliResult<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    let f = file;
    if let Some(v) = f.boundary {
        cfg.boundary = v;
    }
    if let Some(v) = f.method {
        cfg.method = v;
    }
    if let Some(v) = f.assumption {
        cfg.assumption = v;
    }
    if let Some(v) = f.mean_order {
        cfg.mean_order = v;
    }
    if let Some(v) = f.prior_beta_sd {
        cfg.prior_beta_sd = v;
    }
    if let Some(v) = f.prior_hc_scale {
        cfg.prior_hc_scale = v;
    }
    if let Some(v) = f.chains {
        cfg.chains = v;
    }
    if let Some(v) = f.iters {
        cfg.iters = v;
    }
    if let Some(v) = f.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.group_by_running {
        cfg.group_by_running = v;
    }
    if let Some(v) = &f.shifts {
        cfg.shifts = v.clone();
    }

    if let Some(v) = args.boundary {
        cfg.boundary = v;
    }
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.assumption {
        cfg.assumption = v;
    }
    if let Some(v) = args.mean_order {
        cfg.mean_order = v;
    }
    if let Some(v) = args.prior_beta_sd {
        cfg.prior_beta_sd = v;
    }
    if let Some(v) = args.prior_hc_scale {
        cfg.prior_hc_scale = v;
    }
    if let Some(v) = args.sampler.chains {
        cfg.chains = v;
    }
    if let Some(v) = args.sampler.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.sampler.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = args.sampler.seed {
        cfg.seed = v;
    }
    if args.group_by_running {
        cfg.group_by_running = true;
    }
    if let Some(path) = &args.shift_table {
        cfg.shifts = load_shift_table(path)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_fit(args: FitArgs) -> CliResult<()> {
    let file = load_file_config(args.config.as_deref())?;
    let cfg = resolve_analysis(&args, &file)?;
    let formats = resolve_formats(
        &args.output.format,
        &[OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg],
    )?;
    let data = ingest_csv(&args.data, &cfg)?;
    let report = fit_report(&cfg, &data)?;
    print!("{}", render_text(&report));
    let written = write_fit_outputs(&report, &data, &args.output.out_dir, &formats)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_simulate_cmd(args: SimulateArgs) -> CliResult<()> {
    let file = load_file_config(args.config.as_deref())?;
    let mut settings = SimulateSettings::default();
    let parse_dgps = |names: &[String]| -> CliResult<Vec<rdgp::dgp::Dgp>> {
        names
            .iter()
            .map(|s| rdgp::dgp::Dgp::parse(s).map_err(|e| CliError::config(e.to_string())))
            .collect()
    };
    let parse_methods = |names: &[String]| -> CliResult<Vec<rdgp::sim::Method>> {
        names
            .iter()
            .map(|s| rdgp::sim::Method::parse(s).map_err(|e| CliError::config(e.to_string())))
            .collect()
    };
    if let Some(v) = &file.dgps {
        settings.dgps = parse_dgps(v)?;
    }
    if let Some(v) = &file.methods {
        settings.methods = parse_methods(v)?;
    }
    if let Some(v) = file.n {
        settings.n = v;
    }
    if let Some(v) = file.reps {
        settings.reps = v;
    }
    if let Some(v) = file.seed {
        settings.seed = v;
    }
    if let Some(v) = file.chains {
        settings.chains = v;
    }
    if let Some(v) = file.iters {
        settings.iters = v;
    }
    if let Some(v) = file.warmup {
        settings.warmup = v;
    }
    if let Some(v) = file.parallelism {
        settings.parallelism = Some(v);
    }
    if !args.dgps.is_empty() {
        settings.dgps = parse_dgps(&args.dgps)?;
    }
    if !args.methods.is_empty() {
        settings.methods = parse_methods(&args.methods)?;
    }
    if let Some(v) = args.n {
        settings.n = v;
    }
    if let Some(v) = args.reps {
        settings.reps = v;
    }
    if let Some(v) = args.sampler.seed {
        settings.seed = v;
    }
    if let Some(v) = args.sampler.chains {
        settings.chains = v;
    }
    if let Some(v) = args.sampler.iters {
        settings.iters = v;
    }
    if let Some(v) = args.sampler.warmup {
        settings.warmup = v;
    }
    if let Some(v) = args.parallelism {
        settings.parallelism = Some(v);
    }
    let formats =
        resolve_formats(&args.output.format, &[OutputFormat::Csv, OutputFormat::Json])?;

    let report = run_simulate(&settings)?;
    print!("{}", render_summary(&report));
    let written = write_simulate_outputs(&report, &args.output.out_dir, &formats)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_diagnose(args: DiagnoseArgs) -> CliResult<()> {
    let file = load_file_config(args.config.as_deref())?;
    let formats =
        resolve_formats(&args.output.format, &[OutputFormat::Csv, OutputFormat::Svg])?;
    let source = match (&args.source.dgp, &args.source.curve) {
        (Some(name), None) => DiagnoseSource::Named(
            rdgp::dgp::Dgp::parse(name).map_err(|e| CliError::config(e.to_string()))?,
        ),
        (None, Some(path)) => {
            let boundary = args.boundary.or(file.boundary).unwrap_or(0.0);
            if !boundary.is_finite() {
                return Err(CliError::config(format!("boundary must be finite, got {boundary}")));
            }
            DiagnoseSource::Curve { path: path.clone(), boundary }
        }
        // clap's argument group enforces exactly one source.
        _ => unreachable!("argument group guarantees one source"),
    };
    let profile = diagnose_profile(&source)?;
    let written = write_diagnose_outputs(&profile, &args.output.out_dir, &formats)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
