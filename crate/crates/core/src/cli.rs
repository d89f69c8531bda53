//! The `nsgrf` command line.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors. `--threads` (default from `NSGRF_THREADS`, else all
//! cores) sizes the pool every subcommand runs in; outputs do not depend on it.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analytics::{covariance_analysis, param_metrics_with, MetricsOptions, MetricsReport};
use crate::container::{
    config_hash, write_ensemble, write_params, ContainerKind, ContainerReader, Header, TOOL_VERSION,
};
use crate::dataset::{write_dataset, DatasetConfig};
use crate::error::{Error, Result};
use crate::grid::{Boundary, GridGeometry};
use crate::mle::{sliding_window_estimate, WindowSpec};
use crate::sar::ParamFields;
use crate::simulator::{simulate_ensemble, standardize_pixelwise};

pub const THREADS_ENV: &str = "NSGRF_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nsgrf",
    version,
    about = "Non-stationary Gaussian random field toolkit"
)]
pub struct Cli {
    /// Worker threads for all parallel stages.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a TOML config.
    GenDataset(GenDatasetArgs),
    /// Simulate an ensemble from a parameter file or a stationary triple.
    Simulate(SimulateArgs),
    /// Sliding-window maximum-likelihood parameter maps.
    Estimate(EstimateArgs),
    /// Anchor correlation-row comparison of two ensembles.
    EvalCov(EvalCovArgs),
    /// Metrics between estimated and true parameter fields.
    Metrics(MetricsArgs),
    /// Print the JSON schema of the dataset config.
    ConfigSchema,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; defaults to `<config stem>.h5` in `--out-dir`.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Container holding `/samples/<k>/params`.
    #[arg(
        long,
        conflicts_with = "stationary",
        required_unless_present = "stationary"
    )]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub sample: usize,
    /// Constant `kappa2,rho,theta` instead of a parameter file.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        requires = "shape"
    )]
    pub stationary: Option<Vec<f64>>,
    /// Grid `HxW` for `--stationary`.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<(usize, usize)>,
    #[arg(long, short = 'm', default_value_t = 30)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "truncate")]
    pub boundary: BoundaryArg,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum BoundaryArg {
    Truncate,
    PeriodicX,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Truncate => Boundary::Truncate,
            BoundaryArg::PeriodicX => Boundary::PeriodicX,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub sample: usize,
    #[arg(long, default_value_t = 25)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Profile out the marginal variance (for standardized inputs).
    #[arg(long)]
    pub profile_scale: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCovArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub sim: PathBuf,
    /// Competing ensemble; enables the paired t-test.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub sample: usize,
    #[arg(long, default_value_t = crate::analytics::DEFAULT_ANCHORS)]
    pub anchors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub wrap_theta: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_shape(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(h)?, parse(w)?))
}

/// Exit code for an error: 2 for bad input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        _ => 1,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::EvalCov(a) => eval_cov(a),
        Command::Metrics(a) => metrics(a),
        Command::ConfigSchema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&DatasetConfig::json_schema())?
            );
            Ok(())
        }
    })
}

fn provenance_line(header: &Header) -> String {
    format!(
        "# {} kind={:?} config_hash={} seed={}",
        header.tool_version, header.kind, header.config_hash, header.seed
    )
}

fn gen_dataset(a: GenDatasetArgs) -> Result<()> {
    let mut config = DatasetConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.n_samples {
        config.n_samples = n;
    }
    if let Some(m) = a.replicates {
        config.replicates = m;
    }
    config.validate()?;
    let output = a.output.unwrap_or_else(|| {
        let stem = a
            .config
            .file_stem()
            .map(|s| s.to_os_string())
            .unwrap_or_else(|| "dataset".into());
        a.out_dir.join(Path::new(&stem).with_extension("h5"))
    });
    let summary = write_dataset(&config, &output)?;
    let header = Header::new(ContainerKind::Dataset, config.to_json()?, config.seed);
    println!("{}", provenance_line(&header));
    println!(
        "wrote {} samples to {} (train {}, validation {}, test {}); manifest {}",
        summary.n_samples,
        summary.path.display(),
        summary.split_counts.0,
        summary.split_counts.1,
        summary.split_counts.2,
        summary.manifest.display()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (params, source) = match (&a.params, &a.stationary, a.shape) {
        (Some(path), _, _) => {
            let reader = ContainerReader::open(path)?;
            let params = reader.params(a.sample)?;
            let source = json!({
                "params_file": path.display().to_string(),
                "sample": a.sample,
                "params_config_hash": reader.header().config_hash,
            });
            (params, source)
        }
        (None, Some(v), Some((h, w))) => {
            if v.len() != 3 {
                return Err(Error::InvalidParameter(format!(
                    "--stationary takes kappa2,rho,theta; got {} values",
                    v.len()
                )));
            }
            let params = ParamFields::constant(h, w, v[0], v[1], v[2]);
            params.validate()?;
            (params, json!({ "stationary": v, "shape": [h, w] }))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "need --params or --stationary with --shape".into(),
            ))
        }
    };
    let (h, w) = params.shape();
    let geometry = GridGeometry::new(h, w, a.boundary.into())?;
    let mut ens = simulate_ensemble(&params, &geometry, a.replicates, a.seed)?;
    if a.standardize {
        ens = standardize_pixelwise(&ens)?;
    }
    let config = json!({
        "command": "simulate",
        "source": source,
        "replicates": a.replicates,
        "boundary": Boundary::from(a.boundary),
        "standardize": a.standardize,
    });
    let header = Header::new(ContainerKind::Ensemble, config.to_string(), a.seed);
    write_ensemble(&a.output, &header, &ens)?;
    println!("{}", provenance_line(&header));
    println!(
        "wrote {} replicates of {h}x{w} to {}",
        a.replicates,
        a.output.display()
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let spec = WindowSpec::new(a.window)?
        .with_stride(a.stride)?
        .with_profiled_scale(a.profile_scale);
    let reader = ContainerReader::open(&a.ensemble)?;
    let ens = reader.fields(a.sample)?;
    let est = sliding_window_estimate(&ens, &spec)?;
    let config = json!({
        "command": "estimate",
        "ensemble_file": a.ensemble.display().to_string(),
        "sample": a.sample,
        "ensemble_config_hash": reader.header().config_hash,
        "window": spec,
    });
    let header = Header::new(
        ContainerKind::Params,
        config.to_string(),
        reader.header().seed,
    );
    let diagnostics = json!({
        "window": spec,
        "failed_fits": est.n_failed(),
        "weak_theta_pixels": est.weak_theta.iter().filter(|&&v| v == 1).count(),
    });
    write_params(
        &a.output,
        &header,
        &est.params,
        Some(&est.converged),
        &diagnostics.to_string(),
    )?;
    println!("{}", provenance_line(&header));
    println!(
        "wrote {}x{} estimates to {} ({} non-converged pixels filled)",
        est.params.shape().0,
        est.params.shape().1,
        a.output.display(),
        est.n_failed()
    );
    Ok(())
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool_version: &'a str,
    config_hash: String,
    seed: u64,
    config: serde_json::Value,
    report: T,
}

fn emit<T: Serialize>(
    config: serde_json::Value,
    seed: u64,
    report: T,
    text: String,
    json_out: Option<&Path>,
) -> Result<()> {
    let wrapped = Report {
        tool_version: TOOL_VERSION,
        config_hash: config_hash(&config.to_string()),
        seed,
        config,
        report,
    };
    println!(
        "# {} config_hash={} seed={}",
        wrapped.tool_version, wrapped.config_hash, seed
    );
    print!("{text}");
    if let Some(path) = json_out {
        std::fs::write(path, serde_json::to_string_pretty(&wrapped)?)?;
    }
    Ok(())
}

fn eval_cov(a: EvalCovArgs) -> Result<()> {
    let load = |p: &Path| ContainerReader::open(p).and_then(|r| r.fields(a.sample));
    let truth = load(&a.truth)?;
    let sim = load(&a.sim)?;
    let baseline = a.baseline.as_deref().map(load).transpose()?;
    let report = covariance_analysis(&truth, &sim, baseline.as_ref(), a.anchors, a.seed)?;
    let config = json!({
        "command": "eval-cov",
        "truth": a.truth.display().to_string(),
        "sim": a.sim.display().to_string(),
        "baseline": a.baseline.as_ref().map(|p| p.display().to_string()),
        "sample": a.sample,
        "anchors": a.anchors,
    });
    let text = report.to_text();
    emit(config, a.seed, report, text, a.json.as_deref())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let est = ContainerReader::open(&a.estimate)?;
    let truth = ContainerReader::open(&a.truth)?;
    if est.n_samples() != truth.n_samples() {
        return Err(Error::Dimension(format!(
            "{} has {} samples, {} has {}",
            a.estimate.display(),
            est.n_samples(),
            a.truth.display(),
            truth.n_samples()
        )));
    }
    let options = MetricsOptions {
        ssim: None,
        wrap_theta: a.wrap_theta,
    };
    let reports = (0..est.n_samples())
        .map(|k| param_metrics_with(&est.params(k)?, &truth.params(k)?, &options))
        .collect::<Result<Vec<_>>>()?;
    let report = MetricsReport::average(&reports)?;
    let config = json!({
        "command": "metrics",
        "estimate": a.estimate.display().to_string(),
        "truth": a.truth.display().to_string(),
        "wrap_theta": a.wrap_theta,
    });
    let text = report.to_text();
    emit(config, 0, report, text, a.json.as_deref())
}
