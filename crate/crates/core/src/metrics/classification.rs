use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ratio;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Effectiveness {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Harmonic mean of macro precision and macro recall.
    pub macro_f1: f64,
    pub warnings: Vec<String>,
}

/// Accuracy and macro-averaged precision/recall over all `n_classes`
/// classes. A class that is never predicted (or never present) contributes
/// a precision (recall) of 0. Macro F1 is the harmonic mean of the two
/// macro scores, not the mean of per-class F1.
pub fn compute_effectiveness(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<Effectiveness> {
    if truth.is_empty() {
        return Err(Error::Empty("truth labels"));
    }
    check_len("predictions", truth.len(), predictions.len())?;
    if let Some(&c) = predictions.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("class id {c} outside 0..{n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let mut warnings = Vec::new();
    let mut precision = 0.0;
    let mut recall = 0.0;
    for c in 0..n_classes {
        precision += ratio(tp[c], predicted[c]).unwrap_or_else(|| {
            warnings.push(format!("precision of class {c} undefined (never predicted); using 0"));
            0.0
        });
        recall += ratio(tp[c], actual[c]).unwrap_or_else(|| {
            warnings.push(format!("recall of class {c} undefined (absent from truth); using 0"));
            0.0
        });
    }
    let macro_precision = precision / n_classes as f64;
    let macro_recall = recall / n_classes as f64;
    let macro_f1 = if macro_precision + macro_recall > 0.0 {
        2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
    } else {
        0.0
    };
    Ok(Effectiveness {
        accuracy: tp.iter().sum::<usize>() as f64 / truth.len() as f64,
        macro_precision,
        macro_recall,
        macro_f1,
        warnings,
    })
}
