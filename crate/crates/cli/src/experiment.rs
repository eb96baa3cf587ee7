//! Cross-validated benchmark of the baseline and the constrained variants.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use geg_core::constraints::{build_constraint_system, ConstraintKind, ConstraintSystem};
use geg_core::data::{kfold_split, Dataset, FoldPlan, SyntheticSpec};
use geg_core::geg::{fit, GegConfig, IterationTrace};
use geg_core::learners::{Classifier, CostSensitiveOracle, SoftmaxConfig, SoftmaxOracle};
use geg_core::metrics::{Metric, MetricsReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv_io::CsvSchema;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "geg-sp")]
    GegSp,
    #[serde(rename = "geg-eo")]
    GegEo,
    #[serde(rename = "geg-cp")]
    GegCp,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::Baseline, Approach::GegSp, Approach::GegEo, Approach::GegCp];

    pub fn id(self) -> &'static str {
        match self {
            Approach::Baseline => "baseline",
            Approach::GegSp => "geg-sp",
            Approach::GegEo => "geg-eo",
            Approach::GegCp => "geg-cp",
        }
    }

    pub fn constraint(self) -> ConstraintKind {
        match self {
            Approach::Baseline => ConstraintKind::Unconstrained,
            Approach::GegSp => ConstraintKind::DemographicParity,
            Approach::GegEo => ConstraintKind::EqualizedOdds,
            Approach::GegCp => ConstraintKind::CombinedParity,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Approach::ALL
            .into_iter()
            .find(|a| a.id() == s.trim())
            .ok_or_else(|| format!("unknown approach `{s}` (expected baseline, geg-sp, geg-eo or geg-cp)"))
    }
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic { spec: SyntheticSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub approaches: Vec<Approach>,
    pub folds: usize,
    /// Seeds the fold plan (and synthetic data).
    pub seed: u64,
    pub geg: GegConfig,
    pub oracle: SoftmaxConfig,
    /// Tolerance `ε` of every constraint row.
    pub eps: f64,
    /// Keep solver traces in the results file.
    pub trace: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.approaches.is_empty() {
            return Err(CliError::Usage("at least one approach is required".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Usage(format!("--folds must be >= 2, got {}", self.folds)));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(CliError::Usage(format!("eps must be >= 0, got {}", self.eps)));
        }
        self.geg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.oracle.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_groups: usize,
    pub n_classes: usize,
    pub positive_label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_names: Option<Vec<String>>,
}

impl DatasetInfo {
    pub fn of(ds: &Dataset) -> Self {
        Self {
            n_samples: ds.n_samples(),
            n_features: ds.n_features(),
            n_groups: ds.n_groups(),
            n_classes: ds.n_classes(),
            positive_label: ds.positive_label(),
            class_names: ds.class_names().map(<[String]>::to_vec),
            group_names: ds.group_names().map(<[String]>::to_vec),
        }
    }
}

/// Outcome of one (approach, fold) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub approach: String,
    pub fold: usize,
    #[serde(default)]
    pub train_size: usize,
    #[serde(default)]
    pub test_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<IterationTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_gap: f64,
    pub members: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over the successful folds.
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub fold_plan: FoldPlan,
    pub runs: Vec<RunRecord>,
    /// approach → metric name → summary.
    pub summary: BTreeMap<String, BTreeMap<String, MetricSummary>>,
}

impl ResultsFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: ResultsFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a results file: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                file.schema_version
            )));
        }
        Ok(file)
    }

    /// Approach ids in order of first appearance.
    pub fn approaches(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.runs {
            if !out.contains(&r.approach) {
                out.push(r.approach.clone());
            }
        }
        out
    }

    pub fn n_folds(&self) -> usize {
        self.fold_plan.k
    }
}

/// Mean and population standard deviation of every metric over the
/// successful folds of each approach.
pub fn summarize(runs: &[RunRecord]) -> BTreeMap<String, BTreeMap<String, MetricSummary>> {
    let mut out = BTreeMap::new();
    let mut approaches: Vec<&str> = runs.iter().map(|r| r.approach.as_str()).collect();
    approaches.sort_unstable();
    approaches.dedup();
    for approach in approaches {
        let reports: Vec<&MetricsReport> = runs
            .iter()
            .filter(|r| r.approach == approach)
            .filter_map(|r| r.metrics.as_ref())
            .collect();
        let mut per_metric = BTreeMap::new();
        if !reports.is_empty() {
            for metric in Metric::ALL {
                let values: Vec<f64> = reports.iter().map(|m| m.get(metric)).collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                per_metric.insert(
                    metric.name().to_string(),
                    MetricSummary {
                        mean,
                        std: var.sqrt(),
                        n: values.len(),
                    },
                );
            }
        }
        out.insert(approach.to_string(), per_metric);
    }
    out
}

/// The constraint system an approach trains under on `dataset`.
pub fn system_for(kind: ConstraintKind, dataset: &Dataset, eps: f64) -> geg_core::Result<ConstraintSystem> {
    build_constraint_system(kind, dataset.n_groups(), &[dataset.positive_label()], eps)
}

struct FoldOutcome {
    predictions: Vec<usize>,
    solver: Option<SolverSummary>,
    trace: Option<IterationTrace>,
}

fn train_and_predict(approach: Approach, train: &Dataset, test: &Dataset, config: &ExperimentConfig) -> geg_core::Result<FoldOutcome> {
    let oracle = SoftmaxOracle::new(train.n_classes(), config.oracle);
    if approach == Approach::Baseline {
        let model = oracle.fit(train.features(), train.labels(), &vec![1.0; train.n_samples()])?;
        return Ok(FoldOutcome {
            predictions: model.predict(test.features())?,
            solver: None,
            trace: None,
        });
    }
    let system = system_for(approach.constraint(), train, config.eps)?;
    let result = fit(train, &system, &oracle, &config.geg)?;
    let predictions = result.predict(test.features(), config.geg.prediction)?;
    let trace = &result.trace;
    Ok(FoldOutcome {
        predictions,
        solver: Some(SolverSummary {
            iterations: trace.records.len(),
            converged: trace.converged,
            final_gap: trace.final_gap().unwrap_or(0.0),
            members: result.mixture.len(),
            warnings: trace.warnings.clone(),
        }),
        trace: config.trace.then(|| result.trace.clone()),
    })
}

fn run_one(approach: Approach, fold: usize, dataset: &Dataset, plan: &FoldPlan, config: &ExperimentConfig) -> RunRecord {
    let train = dataset.subset(&plan.train_rows(fold));
    let test = dataset.subset(&plan.test_rows(fold));
    guarded(approach, fold, (train.n_samples(), test.n_samples()), || {
        let o = train_and_predict(approach, &train, &test, config)?;
        let metrics = MetricsReport::compute(
            &o.predictions,
            test.labels(),
            test.groups(),
            test.positive_label(),
            test.n_classes(),
        )?;
        Ok((o, metrics))
    })
}

/// Runs `body` for one (approach, fold) pair and records its outcome; errors
/// and panics end up in the record's `error` field.
fn guarded(
    approach: Approach,
    fold: usize,
    (train_size, test_size): (usize, usize),
    body: impl FnOnce() -> geg_core::Result<(FoldOutcome, MetricsReport)>,
) -> RunRecord {
    let mut record = RunRecord {
        approach: approach.id().to_string(),
        fold,
        train_size,
        test_size,
        metrics: None,
        error: None,
        solver: None,
        trace: None,
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(body)) {
        Ok(Ok((o, metrics))) => {
            record.metrics = Some(metrics);
            record.solver = o.solver;
            record.trace = o.trace;
        }
        Ok(Err(e)) => {
            log::error!("{approach} fold {fold}: {e}");
            record.error = Some(e.to_string());
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            log::error!("{approach} fold {fold}: panicked: {msg}");
            record.error = Some(format!("panicked: {msg}"));
        }
    }
    record
}

/// Runs every configured approach on every fold of one shared fold plan.
///
/// Pairs run in parallel; a failing pair is recorded with its error and does
/// not stop the others.
pub fn run_benchmark(config: &ExperimentConfig, dataset: &Dataset) -> CliResult<ResultsFile> {
    config.validate()?;
    let started_at = timestamp();
    let plan = kfold_split(dataset, config.folds, config.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs: Vec<(Approach, usize)> = config
        .approaches
        .iter()
        .flat_map(|&a| (0..config.folds).map(move |f| (a, f)))
        .collect();
    log::info!(
        "benchmark: {} approaches x {} folds on {} rows",
        config.approaches.len(),
        config.folds,
        dataset.n_samples()
    );
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(a, f)| run_one(a, f, dataset, &plan, config))
        .collect();
    let failures = runs.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        log::warn!("{failures} of {} runs failed; see their `error` fields", runs.len());
    }
    Ok(ResultsFile {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: timestamp(),
        config: config.clone(),
        dataset: DatasetInfo::of(dataset),
        fold_plan: plan,
        summary: summarize(&runs),
        runs,
    })
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_results(path: &Path, results: &ResultsFile) -> CliResult<()> {
    let json = serde_json::to_vec_pretty(results).map_err(|e| CliError::Data(format!("cannot encode results: {e}")))?;
    write_atomic(path, &json)
}
