//! Pareto and significance analysis over one or more results files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use geg_core::data::FoldPlan;
use geg_core::metrics::{holm_bonferroni, pareto_front, wilcoxon_one_sided, Alternative, Metric, SolutionPoint};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::experiment::{ResultsFile, RunRecord, SCHEMA_VERSION};

/// Front membership for one (effectiveness, fairness) metric pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSummary {
    pub effectiveness: String,
    pub fairness: String,
    /// approach → number of its (approach, fold) points on the front.
    pub counts: BTreeMap<String, usize>,
    pub points: Vec<FrontPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub approach: String,
    pub fold: usize,
    pub effectiveness: f64,
    pub fairness: f64,
    pub on_front: bool,
}

/// One paired comparison of a constrained variant against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub variant: String,
    pub baseline: String,
    pub metric: String,
    /// `greater` for effectiveness metrics, `less` for fairness metrics:
    /// the alternative is always "the variant is better".
    pub alternative: Alternative,
    pub n_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    pub exact: bool,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub reject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub alpha: f64,
    /// Which tests share one Holm correction.
    pub holm_family: String,
    pub family_size: usize,
    pub approaches: Vec<String>,
    pub n_folds: usize,
    pub fronts: Vec<FrontSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Approaches whose id starts with `geg-` are variants; everything else,
/// including approaches ingested from other tools, is a baseline.
pub fn is_variant(approach: &str) -> bool {
    approach.starts_with("geg-")
}

/// The part of a results file the report needs. Full results files parse
/// as this, and so do files written by other tools that only carry
/// `schema_version`, `runs` and either `fold_plan` or `n_folds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub schema_version: u32,
    #[serde(default)]
    pub fold_plan: Option<FoldPlan>,
    #[serde(default)]
    pub n_folds: Option<usize>,
    pub runs: Vec<RunRecord>,
}

impl ReportInput {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let input: ReportInput = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: not a results file: {e}", path.display())))?;
        if input.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                input.schema_version
            )));
        }
        Ok(input)
    }

    pub fn k(&self) -> usize {
        self.fold_plan
            .as_ref()
            .map(|p| p.k)
            .or(self.n_folds)
            .unwrap_or_else(|| self.runs.iter().map(|r| r.fold + 1).max().unwrap_or(0))
    }
}

impl From<&ResultsFile> for ReportInput {
    fn from(file: &ResultsFile) -> Self {
        Self {
            schema_version: file.schema_version,
            fold_plan: Some(file.fold_plan.clone()),
            n_folds: Some(file.n_folds()),
            runs: file.runs.clone(),
        }
    }
}

/// Merges inputs with equal fold counts into one run list and returns the
/// shared fold count.
pub fn merge_results(inputs: &[ReportInput]) -> CliResult<(usize, Vec<RunRecord>)> {
    let first = inputs.first().ok_or_else(|| CliError::Usage("no results files given".into()))?;
    let k = first.k();
    let mut runs: Vec<RunRecord> = Vec::new();
    let mut owner: BTreeMap<String, usize> = BTreeMap::new();
    for (i, input) in inputs.iter().enumerate() {
        if input.k() != k {
            return Err(CliError::Data(format!(
                "results file #{} has {} folds but #1 has {k}; paired tests need matching folds",
                i + 1,
                input.k()
            )));
        }
        if let Some(r) = input.runs.iter().find(|r| r.fold >= k) {
            return Err(CliError::Data(format!(
                "results file #{}: run `{}` has fold {} outside 0..{k}",
                i + 1,
                r.approach,
                r.fold
            )));
        }
        if let (Some(a), Some(b)) = (&first.fold_plan, &input.fold_plan) {
            if a != b {
                log::warn!("results file #{} was produced with a different fold assignment than #1", i + 1);
            }
        }
        for approach in approaches_in_order(&input.runs) {
            if let Some(prev) = owner.insert(approach.clone(), i) {
                return Err(CliError::Data(format!(
                    "approach `{approach}` appears in results files #{} and #{}",
                    prev + 1,
                    i + 1
                )));
            }
        }
        runs.extend(input.runs.iter().cloned());
    }
    Ok((k, runs))
}

fn metric_by_fold(runs: &[RunRecord], approach: &str, metric: Metric) -> BTreeMap<usize, f64> {
    runs.iter()
        .filter(|r| r.approach == approach)
        .filter_map(|r| r.metrics.as_ref().map(|m| (r.fold, m.get(metric))))
        .collect()
}

fn approaches_in_order(runs: &[RunRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in runs {
        if !out.contains(&r.approach) {
            out.push(r.approach.clone());
        }
    }
    out
}

pub fn build_report(inputs: &[ReportInput], alpha: f64) -> CliResult<Report> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n_folds, runs) = merge_results(inputs)?;
    let approaches = approaches_in_order(&runs);
    let ok_runs: Vec<&RunRecord> = runs.iter().filter(|r| r.metrics.is_some()).collect();
    if ok_runs.is_empty() {
        return Err(CliError::Data("no successful runs to report on".into()));
    }

    let mut fronts = Vec::new();
    for eff in Metric::EFFECTIVENESS {
        for fair in Metric::FAIRNESS {
            let points: Vec<SolutionPoint> = ok_runs
                .iter()
                .map(|r| {
                    let m = r.metrics.as_ref().expect("filtered");
                    SolutionPoint {
                        approach: r.approach.clone(),
                        fold: r.fold,
                        effectiveness: m.get(eff),
                        fairness: m.get(fair),
                    }
                })
                .collect();
            let front = pareto_front(&points).map_err(|e| CliError::Data(e.to_string()))?;
            let mut counts = front.counts;
            for a in &approaches {
                counts.entry(a.clone()).or_insert(0);
            }
            let points = points
                .into_iter()
                .enumerate()
                .map(|(i, p)| FrontPoint {
                    on_front: front.indices.binary_search(&i).is_ok(),
                    approach: p.approach,
                    fold: p.fold,
                    effectiveness: p.effectiveness,
                    fairness: p.fairness,
                })
                .collect();
            fronts.push(FrontSummary {
                effectiveness: eff.name().into(),
                fairness: fair.name().into(),
                counts,
                points,
            });
        }
    }

    let mut comparisons = Vec::new();
    for variant in approaches.iter().filter(|a| is_variant(a)) {
        for baseline in approaches.iter().filter(|a| !is_variant(a)) {
            for metric in Metric::ALL {
                comparisons.push(compare(&runs, variant, baseline, metric)?);
            }
        }
    }
    if !comparisons.is_empty() {
        let p: Vec<f64> = comparisons.iter().map(|c| c.p_value).collect();
        let holm = holm_bonferroni(&p, alpha).map_err(|e| CliError::Data(e.to_string()))?;
        for (c, (adj, rej)) in comparisons.iter_mut().zip(holm.adjusted.into_iter().zip(holm.reject)) {
            c.p_adjusted = adj;
            c.reject = rej;
        }
    } else {
        log::warn!("no variant/baseline pairs: significance tests skipped");
    }

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        alpha,
        holm_family: "all (variant, baseline, metric) tests in this report".into(),
        family_size: comparisons.len(),
        approaches,
        n_folds,
        fronts,
        comparisons,
    })
}

fn compare(runs: &[RunRecord], variant: &str, baseline: &str, metric: Metric) -> CliResult<Comparison> {
    let v = metric_by_fold(runs, variant, metric);
    let b = metric_by_fold(runs, baseline, metric);
    let (x, y): (Vec<f64>, Vec<f64>) = v.iter().filter_map(|(f, &xv)| b.get(f).map(|&yv| (xv, yv))).unzip();
    let alternative = if metric.higher_is_better() {
        Alternative::Greater
    } else {
        Alternative::Less
    };
    let mut out = Comparison {
        variant: variant.into(),
        baseline: baseline.into(),
        metric: metric.name().into(),
        alternative,
        n_pairs: x.len(),
        statistic: None,
        exact: false,
        p_value: 1.0,
        p_adjusted: 1.0,
        reject: false,
        note: None,
    };
    if x.is_empty() {
        out.note = Some("no folds where both approaches succeeded".into());
        return Ok(out);
    }
    match wilcoxon_one_sided(&x, &y, alternative) {
        Ok(w) => {
            out.statistic = Some(w.statistic);
            out.exact = w.exact;
            out.p_value = w.p_value;
        }
        Err(geg_core::Error::Degenerate(msg)) => out.note = Some(msg.to_string()),
        Err(e) => return Err(CliError::Data(e.to_string())),
    }
    Ok(out)
}

/// One row per (metric pair, approach, fold) point.
pub fn write_fronts_csv<W: Write>(writer: W, report: &Report) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_data = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(["effectiveness_metric", "fairness_metric", "approach", "fold", "effectiveness", "fairness", "on_front"])
        .map_err(to_data)?;
    for front in &report.fronts {
        for p in &front.points {
            w.write_record([
                front.effectiveness.clone(),
                front.fairness.clone(),
                p.approach.clone(),
                p.fold.to_string(),
                format!("{:?}", p.effectiveness),
                format!("{:?}", p.fairness),
                p.on_front.to_string(),
            ])
            .map_err(to_data)?;
        }
    }
    w.flush().map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))?;
    Ok(())
}

/// Plain-text digest: front counts per metric pair, then every comparison.
pub fn render_text(report: &Report) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} approaches, {} folds; Holm family: {} ({} tests, alpha = {})",
        report.approaches.len(),
        report.n_folds,
        report.holm_family,
        report.family_size,
        report.alpha
    );
    let _ = writeln!(s, "\nPareto front counts (effectiveness x fairness):");
    for f in &report.fronts {
        let counts: Vec<String> = f.counts.iter().map(|(a, c)| format!("{a}={c}")).collect();
        let _ = writeln!(s, "  {:<16} {:<6} {}", f.effectiveness, f.fairness, counts.join(" "));
    }
    if !report.comparisons.is_empty() {
        let _ = writeln!(s, "\nWilcoxon signed-rank (variant better than baseline):");
        for c in &report.comparisons {
            let _ = writeln!(
                s,
                "  {:<8} vs {:<10} {:<16} n={:<3} p={:.6} adj={:.6} {}{}",
                c.variant,
                c.baseline,
                c.metric,
                c.n_pairs,
                c.p_value,
                c.p_adjusted,
                if c.reject { "REJECT" } else { "-" },
                c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
    }
    s
}
