use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Absolute group differences between the unprivileged group (0) and the
/// privileged group (1).
#[derive(Debug, Clone, PartialEq)]
pub struct Fairness {
    pub spd: f64,
    pub eod: f64,
    pub aod: f64,
    pub spd_p: f64,
    pub eod_p: f64,
    pub aod_p: f64,
    pub warnings: Vec<String>,
}

/// Prediction counts of one group: `cell[t][p]` rows with truth `t`
/// predicted as `p`.
struct GroupCounts {
    cells: Vec<Vec<usize>>,
    size: usize,
}

/// A conditional rate kept as `(hits, size)`.
type Rate = (usize, usize);

impl GroupCounts {
    fn predicted(&self, y: usize) -> usize {
        self.cells.iter().map(|row| row[y]).sum()
    }

    fn with_truth(&self, y: usize) -> usize {
        self.cells[y].iter().sum()
    }

    /// `P(h = y)`.
    fn rate(&self, y: usize) -> Rate {
        (self.predicted(y), self.size)
    }

    /// `P(h = y | Y = y)`.
    fn tpr(&self, y: usize) -> Rate {
        (self.cells[y][y], self.with_truth(y))
    }

    /// `P(h = y | Y ≠ y)`.
    fn fpr(&self, y: usize) -> Rate {
        (self.predicted(y) - self.cells[y][y], self.size - self.with_truth(y))
    }
}

struct Diff<'a> {
    warnings: &'a mut Vec<String>,
}

impl Diff<'_> {
    /// `|a − b|`, or 0 with a warning when either side is undefined.
    fn abs(&mut self, what: &str, a: Rate, b: Rate) -> f64 {
        self.signed(what, a, b).abs()
    }

    /// `a − b` as one fraction with a single rounding, so that differences
    /// of complementary rates are exact negatives of each other.
    fn signed(&mut self, what: &str, (na, da): Rate, (nb, db): Rate) -> f64 {
        if da == 0 || db == 0 {
            self.warnings.push(format!("{what} undefined for a group (empty denominator); using 0"));
            return 0.0;
        }
        let num = na as i128 * db as i128 - nb as i128 * da as i128;
        num as f64 / (da as i128 * db as i128) as f64
    }
}

/// Statistical parity, equal opportunity and average odds differences,
/// each as a maximum over all classes and at the positive label only.
///
/// Groups must be binary with both present. A class whose conditional rate
/// has an empty denominator in either group contributes 0.
pub fn compute_fairness(
    predictions: &[usize],
    truth: &[usize],
    groups: &[usize],
    positive_label: usize,
    n_classes: usize,
) -> Result<Fairness> {
    check_len("predictions", truth.len(), predictions.len())?;
    check_len("group ids", truth.len(), groups.len())?;
    if positive_label >= n_classes {
        return Err(Error::InvalidParameter(format!(
            "positive label {positive_label} outside 0..{n_classes}"
        )));
    }
    if let Some(&c) = predictions.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("class id {c} outside 0..{n_classes}")));
    }
    if groups.iter().any(|&g| g > 1) {
        return Err(Error::InvalidParameter("fairness metrics need binary groups".into()));
    }
    let mut counts = [0, 1].map(|_| GroupCounts {
        cells: (0..n_classes).map(|_| alloc::vec![0; n_classes]).collect(),
        size: 0,
    });
    for ((&p, &t), &g) in predictions.iter().zip(truth).zip(groups) {
        counts[g].cells[t][p] += 1;
        counts[g].size += 1;
    }
    if counts.iter().any(|c| c.size == 0) {
        return Err(Error::Degenerate("fairness metrics need both groups present"));
    }
    let [unpriv, priv_] = &counts;
    let mut warnings = Vec::new();
    let mut diff = Diff {
        warnings: &mut warnings,
    };

    let mut spd = 0.0f64;
    let mut eod = 0.0f64;
    let mut aod = 0.0f64;
    let mut at_positive = (0.0, 0.0, 0.0);
    for y in 0..n_classes {
        let s = diff.abs("selection rate", priv_.rate(y), unpriv.rate(y));
        let e = diff.abs(&format!("TPR of class {y}"), priv_.tpr(y), unpriv.tpr(y));
        let fpr = diff.signed(&format!("FPR of class {y}"), unpriv.fpr(y), priv_.fpr(y));
        let tpr = diff.signed(&format!("TPR of class {y}"), unpriv.tpr(y), priv_.tpr(y));
        let a = (0.5 * (fpr + tpr)).abs();
        spd = spd.max(s);
        eod = eod.max(e);
        aod = aod.max(a);
        if y == positive_label {
            at_positive = (s, e, a);
        }
    }
    let (spd_p, eod_p, aod_p) = at_positive;
    warnings.sort();
    warnings.dedup();
    Ok(Fairness {
        spd,
        eod,
        aod,
        spd_p,
        eod_p,
        aod_p,
        warnings,
    })
}
