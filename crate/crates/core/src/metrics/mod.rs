//! Effectiveness and group-fairness metrics, Pareto counting and the
//! paired significance tests used to compare approaches.

mod classification;
mod fairness;
mod pareto;
mod stats;

pub use classification::{compute_effectiveness, Effectiveness};
pub use fairness::{compute_fairness, Fairness};
pub use pareto::{dominates, pareto_front, ParetoFront, SolutionPoint};
pub use stats::{holm_bonferroni, wilcoxon_one_sided, Alternative, HolmResult, WilcoxonResult};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// All ten metrics for one set of predictions. Fairness values are
/// absolute differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub spd: f64,
    pub eod: f64,
    pub aod: f64,
    pub spd_p: f64,
    pub eod_p: f64,
    pub aod_p: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn compute(
        predictions: &[usize],
        truth: &[usize],
        groups: &[usize],
        positive_label: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let eff = compute_effectiveness(predictions, truth, n_classes)?;
        let fair = compute_fairness(predictions, truth, groups, positive_label, n_classes)?;
        let mut warnings = eff.warnings;
        warnings.extend(fair.warnings);
        Ok(Self {
            accuracy: eff.accuracy,
            macro_precision: eff.macro_precision,
            macro_recall: eff.macro_recall,
            macro_f1: eff.macro_f1,
            spd: fair.spd,
            eod: fair.eod,
            aod: fair.aod,
            spd_p: fair.spd_p,
            eod_p: fair.eod_p,
            aod_p: fair.aod_p,
            warnings,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::MacroPrecision => self.macro_precision,
            Metric::MacroRecall => self.macro_recall,
            Metric::MacroF1 => self.macro_f1,
            Metric::Spd => self.spd,
            Metric::Eod => self.eod,
            Metric::Aod => self.aod,
            Metric::SpdP => self.spd_p,
            Metric::EodP => self.eod_p,
            Metric::AodP => self.aod_p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroPrecision,
    MacroRecall,
    MacroF1,
    Spd,
    Eod,
    Aod,
    SpdP,
    EodP,
    AodP,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Accuracy,
        Metric::MacroPrecision,
        Metric::MacroRecall,
        Metric::MacroF1,
        Metric::Spd,
        Metric::Eod,
        Metric::Aod,
        Metric::SpdP,
        Metric::EodP,
        Metric::AodP,
    ];

    pub const EFFECTIVENESS: [Metric; 4] = [
        Metric::Accuracy,
        Metric::MacroPrecision,
        Metric::MacroRecall,
        Metric::MacroF1,
    ];

    pub const FAIRNESS: [Metric; 6] = [
        Metric::SpdP,
        Metric::EodP,
        Metric::AodP,
        Metric::Spd,
        Metric::Eod,
        Metric::Aod,
    ];

    /// Key used in JSON documents.
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroPrecision => "macro_precision",
            Metric::MacroRecall => "macro_recall",
            Metric::MacroF1 => "macro_f1",
            Metric::Spd => "spd",
            Metric::Eod => "eod",
            Metric::Aod => "aod",
            Metric::SpdP => "spd_p",
            Metric::EodP => "eod_p",
            Metric::AodP => "aod_p",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Effectiveness metrics improve upwards, fairness metrics downwards.
    pub fn higher_is_better(self) -> bool {
        Self::EFFECTIVENESS.contains(&self)
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
