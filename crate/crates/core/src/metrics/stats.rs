use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Direction of the alternative hypothesis for the paired differences
/// `x − y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `x` tends to be larger than `y`.
    Greater,
    /// `x` tends to be smaller than `y`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_value: f64,
    /// Whether the p-value comes from the exact null distribution.
    pub exact: bool,
}

/// Largest sample size handled by the exact null distribution.
const EXACT_LIMIT: usize = 20;

/// One-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied absolute differences share the
/// average rank. Up to 20 remaining pairs the p-value is exact: it is the
/// share of the `2ⁿ` equally likely sign assignments whose statistic is at
/// least as extreme. The null distribution is counted over doubled ranks,
/// which stay integral under ties. Larger samples use the normal
/// approximation with the tie-corrected variance and no continuity
/// correction.
pub fn wilcoxon_one_sided(x: &[f64], y: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    check_len("paired sample", x.len(), y.len())?;
    let mut diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired sample"));
    }
    diffs.retain(|&d| d != 0.0);
    if diffs.is_empty() {
        return Err(Error::Degenerate("all paired differences are zero"));
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = diffs.len();

    // doubled average ranks: a tie block at 1-based positions i..=j gets i + j
    let mut doubled = vec![0usize; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        for r in &mut doubled[i..=j] {
            *r = (i + 1) + (j + 1);
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    let w2: usize = doubled.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let statistic = w2 as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let total = n * (n + 1);
        let mut counts = vec![0u64; total + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let tail: u64 = match alternative {
            Alternative::Greater => counts[w2..].iter().sum(),
            Alternative::Less => counts[..=w2].iter().sum(),
        };
        return Ok(WilcoxonResult {
            statistic,
            n,
            p_value: tail as f64 / (1u64 << n) as f64,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let ties: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let z = (statistic - mean) / libm::sqrt(var);
    let p_value = match alternative {
        Alternative::Greater => 0.5 * libm::erfc(z / core::f64::consts::SQRT_2),
        Alternative::Less => 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2),
    };
    Ok(WilcoxonResult {
        statistic,
        n,
        p_value,
        exact: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    /// In input order.
    pub reject: Vec<bool>,
    /// Holm-adjusted p-values, in input order.
    pub adjusted: Vec<f64>,
}

/// Holm's step-down procedure.
///
/// With `p_(1) ≤ … ≤ p_(m)`, hypotheses are rejected in order while
/// `p_(i) < α/(m − i + 1)`; the first failure stops the procedure. The
/// adjusted value is `min(1, max_{j ≤ i} (m − j + 1)·p_(j))`, so a
/// hypothesis is rejected exactly when its adjusted p-value is below `α`.
pub fn holm_bonferroni(pvalues: &[f64], alpha: f64) -> Result<HolmResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0, 1)")));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("p-value {p} not in [0, 1]")));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));

    let mut reject = vec![false; m];
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    let mut stopped = false;
    for (rank, &idx) in order.iter().enumerate() {
        let factor = (m - rank) as f64;
        let p = pvalues[idx];
        if !stopped && p < alpha / factor {
            reject[idx] = true;
        } else {
            stopped = true;
        }
        running = running.max(factor * p).min(1.0);
        adjusted[idx] = running;
    }
    Ok(HolmResult { reject, adjusted })
}
