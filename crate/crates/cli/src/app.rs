//! Command line surface: argument parsing and the four commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use geg_core::data::{generate_synthetic, Dataset, SyntheticSpec};
use geg_core::geg::{fit, GegConfig, IterationTrace, PredictionMode};
use geg_core::learners::{SoftmaxConfig, SoftmaxOracle};
use geg_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::csv_io::{default_feature_names, load_csv, write_csv, CsvSchema};
use crate::error::{CliError, CliResult};
use crate::experiment::{
    run_benchmark, system_for, timestamp, write_atomic, write_results, Approach, DataSource, DatasetInfo,
    ExperimentConfig, SolverSummary, SCHEMA_VERSION,
};
use crate::report::{build_report, render_text, write_fronts_csv, ReportInput};

#[derive(Debug, Parser)]
#[command(name = "geg", version, about = "Fairness-constrained classification benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic biased dataset as CSV.
    Synth(SynthArgs),
    /// Fit one constrained mixture on a whole dataset.
    Run(RunArgs),
    /// Cross-validate the baseline and constrained variants.
    Benchmark(BenchmarkArgs),
    /// Pareto counts and significance tests over results files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec (JSON).
    #[arg(long, value_name = "SPEC.json")]
    pub synthetic: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(skip)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, value_name = "PATH", required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate the data from a spec (JSON) instead of reading a CSV.
    #[arg(long, value_name = "SPEC.json")]
    pub synthetic: Option<PathBuf>,
    #[arg(long, value_name = "COL", requires = "data")]
    pub label: Option<String>,
    #[arg(long, value_name = "COL", requires = "data")]
    pub sensitive: Option<String>,
    /// Label value treated as the favourable outcome.
    #[arg(long, value_name = "VALUE", requires = "data")]
    pub positive: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    Sp,
    Eo,
    Cp,
}

impl ConstraintArg {
    pub fn approach(self) -> Approach {
        match self {
            ConstraintArg::Sp => Approach::GegSp,
            ConstraintArg::Eo => Approach::GegEo,
            ConstraintArg::Cp => Approach::GegCp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictArg {
    Vote,
    Sample,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "sp")]
    pub constraint: ConstraintArg,
    /// Dual learning rate.
    #[arg(long, default_value_t = 1e-5)]
    pub eta: f64,
    /// Multiplier budget is 1/delta.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Stop once the duality gap falls below this.
    #[arg(long, default_value_t = 1e-3)]
    pub nu: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 5)]
    pub t_min: usize,
    /// Constraint tolerance.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "vote")]
    pub predict: PredictArg,
    /// Seeds folds, synthetic data, learner and sampled prediction.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit per-iteration solver traces.
    #[arg(long)]
    pub trace: bool,
}

impl SolverArgs {
    fn geg_config(&self) -> GegConfig {
        GegConfig {
            eta: self.eta,
            delta: self.delta,
            nu: self.nu,
            max_iter: self.max_iter,
            t_min: self.t_min,
            prediction: match self.predict {
                PredictArg::Vote => PredictionMode::ExpectedVote,
                PredictArg::Sample => PredictionMode::Sampled { seed: self.seed },
            },
        }
    }

    fn oracle_config(&self) -> SoftmaxConfig {
        SoftmaxConfig {
            seed: self.seed,
            ..SoftmaxConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output JSON; stdout when omitted. Traces go next to it as
    /// `<out>.trace.jsonl`, or to stderr without `--out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated subset of baseline, geg-sp, geg-eo, geg-cp.
    /// Defaults to the baseline plus the variant named by `--constraint`.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub approaches: Option<Vec<Approach>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Results JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results files sharing one fold structure.
    #[arg(required = true, value_name = "RESULTS.json")]
    pub results: Vec<PathBuf>,
    /// Family-wise significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Report JSON; the front table is written to `<out>.fronts.csv`.
    /// Without it, a text digest goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(args) => synth(&args),
        Command::Run(args) => run(&args),
        Command::Benchmark(args) => benchmark(&args),
        Command::Report(args) => report(&args),
    }
}

fn read_spec(path: &Path) -> CliResult<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid spec: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

fn synthesize(spec: &SyntheticSpec, seed: u64) -> CliResult<Dataset> {
    generate_synthetic(spec, seed).map_err(|e| CliError::Data(e.to_string()))
}

fn load_source(args: &DataArgs, seed: u64) -> CliResult<(DataSource, Dataset)> {
    if let Some(path) = &args.synthetic {
        let spec = read_spec(path)?;
        let ds = synthesize(&spec, seed)?;
        return Ok((DataSource::Synthetic { spec }, ds));
    }
    let path = args.data.as_ref().expect("clap enforces one source");
    let missing = |flag: &str| CliError::Usage(format!("--data requires {flag}"));
    let schema = CsvSchema {
        label: args.label.clone().ok_or_else(|| missing("--label"))?,
        sensitive: args.sensitive.clone().ok_or_else(|| missing("--sensitive"))?,
        positive: args.positive.clone().ok_or_else(|| missing("--positive"))?,
    };
    let loaded = load_csv(path, &schema)?;
    Ok((
        DataSource::Csv {
            path: path.clone(),
            schema,
        },
        loaded.dataset,
    ))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(format!("cannot encode JSON: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let spec = read_spec(&args.synthetic)?;
    let ds = synthesize(&spec, args.seed)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &ds, &default_feature_names(ds.n_features()))?;
    emit(args.out.as_deref(), &buf)?;
    log::info!("wrote {} rows", ds.n_samples());
    Ok(())
}

/// Output of the `run` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub schema_version: u32,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub approach: Approach,
    pub source: DataSource,
    pub geg: GegConfig,
    pub oracle: SoftmaxConfig,
    pub eps: f64,
    pub dataset: DatasetInfo,
    pub solver: SolverSummary,
    /// Mixture weight of each distinct member.
    pub mixture_weights: Vec<f64>,
    /// Metrics of the mixture on the data it was fitted on.
    pub training_metrics: MetricsReport,
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let started_at = timestamp();
    let solver = &args.solver;
    let geg = solver.geg_config();
    geg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(solver.eps.is_finite() && solver.eps >= 0.0) {
        return Err(CliError::Usage(format!("--eps must be >= 0, got {}", solver.eps)));
    }
    let (source, ds) = load_source(&args.data, solver.seed)?;
    let approach = solver.constraint.approach();
    let system = system_for(approach.constraint(), &ds, solver.eps).map_err(|e| CliError::Data(e.to_string()))?;
    let oracle = SoftmaxOracle::new(ds.n_classes(), solver.oracle_config());
    let result = fit(&ds, &system, &oracle, &geg)?;
    let predictions = result.predict(ds.features(), geg.prediction)?;
    let training_metrics =
        MetricsReport::compute(&predictions, ds.labels(), ds.groups(), ds.positive_label(), ds.n_classes())?;
    let trace = &result.trace;
    for w in &trace.warnings {
        log::warn!("{w}");
    }
    let output = RunOutput {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: timestamp(),
        approach,
        source,
        geg,
        oracle: solver.oracle_config(),
        eps: solver.eps,
        dataset: DatasetInfo::of(&ds),
        solver: SolverSummary {
            iterations: trace.records.len(),
            converged: trace.converged,
            final_gap: trace.final_gap().unwrap_or(0.0),
            members: result.mixture.len(),
            warnings: trace.warnings.clone(),
        },
        mixture_weights: result.mixture.weights(),
        training_metrics,
    };
    if solver.trace {
        let jsonl = trace_jsonl(trace)?;
        match &args.out {
            Some(out) => write_atomic(&with_suffix(out, ".trace.jsonl"), &jsonl)?,
            None => std::io::stderr()
                .write_all(&jsonl)
                .map_err(|e| CliError::io("<stderr>", e))?,
        }
    }
    emit(args.out.as_deref(), &to_json(&output)?)
}

/// One JSON object per solver iteration.
pub fn trace_jsonl(trace: &IterationTrace) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for record in &trace.records {
        serde_json::to_writer(&mut out, record).map_err(|e| CliError::Data(format!("cannot encode trace: {e}")))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let solver = &args.solver;
    let approaches = args
        .approaches
        .clone()
        .unwrap_or_else(|| vec![Approach::Baseline, solver.constraint.approach()]);
    let (source, ds) = load_source(&args.data, solver.seed)?;
    let config = ExperimentConfig {
        source,
        approaches,
        folds: args.folds,
        seed: solver.seed,
        geg: solver.geg_config(),
        oracle: solver.oracle_config(),
        eps: solver.eps,
        trace: solver.trace,
    };
    config.validate()?;
    if ds.n_samples() < config.folds {
        return Err(CliError::Data(format!(
            "{} rows cannot fill {} folds",
            ds.n_samples(),
            config.folds
        )));
    }
    let results = run_benchmark(&config, &ds)?;
    match &args.out {
        Some(path) => write_results(path, &results),
        None => emit(None, &to_json(&results)?),
    }
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let inputs = args
        .results
        .iter()
        .map(|p| ReportInput::read(p))
        .collect::<CliResult<Vec<_>>>()?;
    let report = build_report(&inputs, args.alpha)?;
    match &args.out {
        Some(out) => {
            let mut csv = Vec::new();
            write_fronts_csv(&mut csv, &report)?;
            write_atomic(&with_suffix(out, ".fronts.csv"), &csv)?;
            write_atomic(out, &to_json(&report)?)?;
            eprint!("{}", render_text(&report));
        }
        None => emit(None, render_text(&report).as_bytes())?,
    }
    Ok(())
}
