//! Command-line entry points.
//!
//! Four subcommands wire the library into reproducible runs:
//!
//! * `estimate`: one precision-matrix estimate from a return panel, as JSON;
//! * `backtest`: the rolling minimum-variance harness, as JSON + CSVs;
//! * `ldf-grid`: bivariate LDF contour data, as CSV;
//! * `simulate`: a seeded multivariate t panel in the generic CSV layout.
//!
//! Every output file gets a `<output>.manifest.json` sidecar recording the
//! subcommand, resolved configuration, SHA-256 digests of the inputs, the
//! seed and the tool version, so identical manifests plus identical inputs
//! imply byte-identical outputs (the manifest timestamp is informational).
//! Files are written to a temporary name and renamed into place.
//!
//! Exit codes: 0 success, 1 data or estimation failure, 2 flag errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{load_ff_industry, load_returns_csv, simulate_t, ReturnsMatrix};
use crate::error::Error;
use crate::gpm::{
    estimate_gpm_abs_with, estimate_gpm_region_with, estimate_gpm_taylor_with, estimate_gpm_with,
    gpm_gaussian, GpmEstimate, GpmKind,
};
use crate::ldf::{ldf_grid, GridAxis, TStudentParams};
use crate::numerics::{sample_moments, SpdMatrix};
use crate::portfolio::{rolling_backtest, Aggregation, BacktestConfig, FallbackPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "gpmat",
    version,
    about = "Generalized precision matrices and minimum-variance backtests for heavy-tailed returns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a precision matrix from a return panel and write it as JSON.
    Estimate(EstimateArgs),
    /// Run the rolling-window minimum-variance backtest.
    Backtest(BacktestArgs),
    /// Tabulate the bivariate t LDF over a grid and write contour CSV data.
    LdfGrid(LdfGridArgs),
    /// Draw a multivariate t return panel and write it as generic CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Generic `date,<asset>,...` decimal returns.
    Csv,
    /// Kenneth French daily industry layout (percent returns).
    Ff,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Input return panel.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: InputFormat,
    /// inv | signed | abs | taylor | region
    #[arg(long)]
    pub estimator: String,
    /// Degrees of freedom (ignored by `inv`).
    #[arg(long, default_value_t = 6.0)]
    pub nu: f64,
    /// Tail-region threshold t for the region estimator.
    #[arg(long)]
    pub region_threshold: Option<f64>,
    /// Variable pair for the region indicator, as `p,q` (0-based).
    #[arg(long, default_value = "0,1")]
    pub pair: String,
    /// Subtract the window mean before forming estimator terms.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub demean: bool,
    /// Rescale the sample covariance to the t scatter (ν−2)/ν·Σ̂.
    #[arg(long, default_value_t = false)]
    pub scatter_rescale: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: InputFormat,
    /// Estimation window size in rows.
    #[arg(long)]
    pub ws: usize,
    /// Rebalance period in rows.
    #[arg(long, default_value_t = 21)]
    pub tau: usize,
    /// Degrees of freedom; repeat the flag for several values.
    #[arg(long = "nu", required = false)]
    pub nu: Vec<f64>,
    /// Comma-separated subset of inv,signed,abs,taylor,region.
    #[arg(long, default_value = "inv,signed,taylor,abs")]
    pub estimators: String,
    /// Annualization factor for mean and variance (default 252/τ).
    #[arg(long)]
    pub annualization: Option<f64>,
    /// Master seed for the bootstrap variance test.
    #[arg(long)]
    pub seed: u64,
    /// Bootstrap replications for the variance test.
    #[arg(long, default_value_t = 4999)]
    pub lw_reps: usize,
    #[arg(long)]
    pub region_threshold: Option<f64>,
    #[arg(long, default_value = "0,1")]
    pub pair: String,
    /// skip-window | hold-previous | fail
    #[arg(long, default_value = "hold-previous")]
    pub fallback: String,
    /// compound | simple-sum
    #[arg(long, default_value = "compound")]
    pub aggregate: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub demean: bool,
    #[arg(long, default_value_t = false)]
    pub scatter_rescale: bool,
    /// Output directory for report.json and the companion CSVs.
    #[arg(long)]
    pub outdir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LdfGridArgs {
    #[arg(long, default_value_t = 6.0)]
    pub nu: f64,
    /// Correlation of the bivariate scatter, |rho| < 1.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Half-width R of the symmetric grid [−R, R]².
    #[arg(long, default_value_t = 4.0)]
    pub range: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Number of rows to draw.
    #[arg(long)]
    pub n: usize,
    /// Dimension (asset count).
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 6.0)]
    pub nu: f64,
    /// Equicorrelation of the scatter matrix (default 0).
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// d×d scatter matrix as headerless CSV (overrides --rho).
    #[arg(long)]
    pub sigma_file: Option<PathBuf>,
    /// Multiply every draw by this factor (e.g. 0.01 for daily-return scale).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse the CLI and run; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Backtest(args) => cmd_backtest(&args),
        Command::LdfGrid(args) => cmd_ldf_grid(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn sha256_hex(path: &Path) -> crate::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    tool_version: String,
    /// Informational only; excluded from reproducibility comparisons.
    timestamp_unix: u64,
}

fn write_atomic(path: &Path, content: &str) -> crate::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, content).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_manifest(
    output: &Path,
    subcommand: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    seed: Option<u64>,
) -> crate::Result<()> {
    let digests = inputs
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(p)?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config,
        inputs: digests,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    let manifest_path = manifest_sidecar(output);
    write_atomic(&manifest_path, &text)
}

/// `<output>.manifest.json` next to an output file.
pub fn manifest_sidecar(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

fn load_panel(path: &Path, format: InputFormat) -> crate::Result<ReturnsMatrix> {
    match format {
        InputFormat::Csv => load_returns_csv(path),
        InputFormat::Ff => {
            let (panel, dropped) = load_ff_industry(path)?;
            if dropped > 0 {
                eprintln!("note: dropped {dropped} rows containing missing-data sentinels");
            }
            Ok(panel)
        }
    }
}

fn parse_pair(text: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(usage(format!("--pair expects 'p,q', got '{text}'")));
    }
    let p: usize = parts[0]
        .trim()
        .parse()
        .map_err(|_| usage(format!("--pair index '{}' is not an integer", parts[0])))?;
    let q: usize = parts[1]
        .trim()
        .parse()
        .map_err(|_| usage(format!("--pair index '{}' is not an integer", parts[1])))?;
    if p == q {
        return Err(usage("--pair indices must differ"));
    }
    Ok((p, q))
}

fn config_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("args serialize")
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let kind = GpmKind::parse(&args.estimator).map_err(|e| usage(e.to_string()))?;
    if !(args.nu > 0.0) {
        return Err(usage(format!("--nu must be positive, got {}", args.nu)));
    }
    let pair = parse_pair(&args.pair)?;
    if kind == GpmKind::Region && args.region_threshold.is_none() {
        return Err(usage("--estimator region requires --region-threshold"));
    }
    let panel = load_panel(&args.input, args.format)?;
    let moments = sample_moments(&panel.values, args.demean)?;
    // the baseline ignores ν entirely, including the scatter rescale
    let moments = if args.scatter_rescale && kind != GpmKind::InverseCovariance {
        moments.rescaled_to_scatter(args.nu)?
    } else {
        moments
    };
    let estimate: GpmEstimate = match kind {
        GpmKind::InverseCovariance => gpm_gaussian(&moments)?,
        GpmKind::Signed => estimate_gpm_with(&panel.values, &moments, args.nu)?,
        GpmKind::Abs => estimate_gpm_abs_with(&panel.values, &moments, args.nu)?,
        GpmKind::Taylor => estimate_gpm_taylor_with(&panel.values, &moments, args.nu)?,
        GpmKind::Region => {
            let t = args.region_threshold.expect("validated above");
            if t < 0.0 {
                return Err(usage("--region-threshold must be nonnegative"));
            }
            let est = estimate_gpm_region_with(&panel.values, &moments, args.nu, t, pair)?;
            if est.region_count == Some(0) {
                eprintln!("warning: empty region (no observation with x_p^2 + x_q^2 >= {t}); zero matrix written");
            }
            est
        }
    };
    write_atomic(&args.output, &estimate.to_json())?;
    write_manifest(
        &args.output,
        "estimate",
        config_json(args),
        &[&args.input],
        None,
    )?;
    println!(
        "wrote {} ({} estimator, {}x{} matrix from {} rows)",
        args.output.display(),
        kind.label(),
        estimate.dim(),
        estimate.dim(),
        estimate.n
    );
    Ok(())
}

fn cmd_backtest(args: &BacktestArgs) -> CliResult<()> {
    let estimators = args
        .estimators
        .split(',')
        .map(|tok| GpmKind::parse(tok.trim()).map_err(|e| usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    if args.ws < 2 {
        return Err(usage("--ws must be at least 2"));
    }
    if args.tau < 1 {
        return Err(usage("--tau must be at least 1"));
    }
    let nu_list = if args.nu.is_empty() {
        vec![6.0]
    } else {
        args.nu.clone()
    };
    if nu_list.iter().any(|&nu| !(nu > 0.0)) {
        return Err(usage("every --nu must be positive"));
    }
    let pair = parse_pair(&args.pair)?;
    let fallback = match args.fallback.as_str() {
        "skip-window" => FallbackPolicy::SkipWindow,
        "hold-previous" => FallbackPolicy::HoldPrevious,
        "fail" => FallbackPolicy::Fail,
        other => {
            return Err(usage(format!(
                "--fallback must be skip-window|hold-previous|fail, got '{other}'"
            )))
        }
    };
    let aggregation = match args.aggregate.as_str() {
        "compound" => Aggregation::Compound,
        "simple-sum" => Aggregation::SimpleSum,
        other => {
            return Err(usage(format!(
                "--aggregate must be compound|simple-sum, got '{other}'"
            )))
        }
    };
    if estimators.contains(&GpmKind::Region) && args.region_threshold.is_none() {
        return Err(usage("the region estimator requires --region-threshold"));
    }

    let panel = load_panel(&args.input, args.format)?;
    let mut config = BacktestConfig::new(args.ws, args.tau);
    config.nu_list = nu_list;
    config.estimators = estimators;
    config.region_threshold = args.region_threshold;
    config.region_pair = pair;
    config.annualization_factor = args.annualization.unwrap_or(252.0 / args.tau as f64);
    config.fallback_policy = fallback;
    config.aggregation = aggregation;
    config.demean = args.demean;
    config.scatter_rescale = args.scatter_rescale;
    config.seed = args.seed;
    config.lw_reps = args.lw_reps;

    let report = rolling_backtest(&panel, &config)?;

    std::fs::create_dir_all(&args.outdir)
        .map_err(|e| Error::io(args.outdir.display().to_string(), e))?;
    let report_path = args.outdir.join("report.json");
    write_atomic(&report_path, &report.to_json())?;
    report.write_csvs(&args.outdir)?;
    write_manifest(
        &report_path,
        "backtest",
        config_json(args),
        &[&args.input],
        Some(args.seed),
    )?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "backtest: T={} N={} M={} windows -> {}",
        report.n_periods,
        report.n_assets,
        report.n_windows,
        report_path.display()
    );
    println!(
        "{:<18} {:>12} {:>12} {:>10} {:>12} {:>10}  sig",
        "estimator", "ann.var", "ann.mean", "SR(raw)", "VaR95", "TO"
    );
    for run in &report.runs {
        println!(
            "{:<18} {:>12.6} {:>12.6} {:>10.5} {:>12.6} {:>10.5}  {}",
            run.label,
            run.metrics.variance_annualized,
            run.metrics.mean_annualized,
            run.metrics.sharpe_raw,
            run.metrics.var95,
            run.metrics.turnover,
            if run.kind == GpmKind::InverseCovariance {
                "(baseline)"
            } else if let Some(note) = &run.variance_test_note {
                note
            } else {
                &run.significance
            }
        );
    }
    Ok(())
}

fn cmd_ldf_grid(args: &LdfGridArgs) -> CliResult<()> {
    if !(args.rho.abs() < 1.0) {
        return Err(usage(format!(
            "--rho must satisfy |rho| < 1, got {}",
            args.rho
        )));
    }
    if args.steps < 2 {
        return Err(usage("--steps must be at least 2"));
    }
    if !(args.nu > 0.0) {
        return Err(usage(format!("--nu must be positive, got {}", args.nu)));
    }
    if !(args.range > 0.0) {
        return Err(usage(format!(
            "--range must be positive, got {}",
            args.range
        )));
    }
    let params = TStudentParams::bivariate(args.rho, args.nu)?;
    let axis = GridAxis {
        min: -args.range,
        max: args.range,
        steps: args.steps,
    };
    let grid = ldf_grid(&params, (0, 1), axis, axis, &Array1::zeros(2))?;
    write_atomic(&args.output, &grid.to_csv())?;
    write_manifest(&args.output, "ldf-grid", config_json(args), &[], None)?;
    println!(
        "wrote {} ({}x{} grid, nu={}, rho={})",
        args.output.display(),
        args.steps,
        args.steps,
        args.nu,
        args.rho
    );
    Ok(())
}

fn equicorrelation(d: usize, rho: f64) -> CliResult<SpdMatrix> {
    let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { -1.0 };
    if !(rho < 1.0 && rho > lower) {
        return Err(usage(format!(
            "--rho must lie in ({lower}, 1) for dimension {d}, got {rho}"
        )));
    }
    let mut m = Array2::from_elem((d, d), rho);
    for i in 0..d {
        m[[i, i]] = 1.0;
    }
    Ok(SpdMatrix::new(m).expect("square by construction"))
}

fn load_sigma_csv(path: &Path, d: usize) -> CliResult<SpdMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(Error::io(path.display().to_string(), e)))?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows += 1;
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Runtime(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    column: col + 1,
                    message: format!("cannot parse '{}' as a matrix entry", field.trim()),
                })
            })?;
            values.push(v);
        }
    }
    if rows != d || values.len() != d * d {
        return Err(usage(format!(
            "--sigma-file must be a {d}x{d} matrix, got {rows} rows / {} values",
            values.len()
        )));
    }
    let m = Array2::from_shape_vec((d, d), values).expect("shape checked");
    SpdMatrix::new(m).map_err(CliError::Runtime)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.n < 1 {
        return Err(usage("--n must be at least 1"));
    }
    if args.d < 1 {
        return Err(usage("--d must be at least 1"));
    }
    if !(args.nu > 0.0) {
        return Err(usage(format!("--nu must be positive, got {}", args.nu)));
    }
    let sigma = match (&args.sigma_file, args.rho) {
        (Some(path), _) => load_sigma_csv(path, args.d)?,
        (None, Some(rho)) => equicorrelation(args.d, rho)?,
        (None, None) => SpdMatrix::identity(args.d),
    };
    if !(args.scale > 0.0) {
        return Err(usage(format!(
            "--scale must be positive, got {}",
            args.scale
        )));
    }
    let params = TStudentParams::new(Array1::zeros(args.d), sigma, args.nu)?;
    let mut panel = simulate_t(args.n, &params, args.seed)?;
    if args.scale != 1.0 {
        panel.values *= args.scale;
    }
    write_atomic(&args.output, &panel.to_csv_string())?;
    let inputs: Vec<&Path> = args.sigma_file.iter().map(|p| p.as_path()).collect();
    write_manifest(
        &args.output,
        "simulate",
        config_json(args),
        &inputs,
        Some(args.seed),
    )?;
    println!(
        "wrote {} ({} rows x {} assets, nu={}, seed={})",
        args.output.display(),
        args.n,
        args.d,
        args.nu,
        args.seed
    );
    Ok(())
}
