use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (approach, fold) result projected onto an effectiveness metric
/// (maximized) and a fairness metric (minimized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPoint {
    pub approach: String,
    pub fold: usize,
    pub effectiveness: f64,
    pub fairness: f64,
}

/// `p` is at least as good as `q` in both objectives and strictly better
/// in one.
pub fn dominates(p: &SolutionPoint, q: &SolutionPoint) -> bool {
    p.effectiveness >= q.effectiveness
        && p.fairness <= q.fairness
        && (p.effectiveness > q.effectiveness || p.fairness < q.fairness)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    /// Indices of the non-dominated points, ascending.
    pub indices: Vec<usize>,
    /// Front membership per approach id; approaches without a front point
    /// are listed with 0.
    pub counts: BTreeMap<String, usize>,
}

/// Non-dominated points of `points`. Identical points do not dominate each
/// other, so duplicates on the front are all kept.
pub fn pareto_front(points: &[SolutionPoint]) -> Result<ParetoFront> {
    if points.is_empty() {
        return Err(Error::Empty("solution points"));
    }
    if points.iter().any(|p| !(p.effectiveness.is_finite() && p.fairness.is_finite())) {
        return Err(Error::NonFinite("solution points"));
    }
    // sweep by decreasing effectiveness; within a tie only the best fairness
    // survives, and it must beat every strictly more effective point
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .effectiveness
            .total_cmp(&points[a].effectiveness)
            .then(points[a].fairness.total_cmp(&points[b].fairness))
    });
    let mut on_front = alloc::vec![false; points.len()];
    let mut best_above = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let eff = points[order[i]].effectiveness;
        let group_min = points[order[i]].fairness;
        let mut j = i;
        while j < order.len() && points[order[j]].effectiveness == eff {
            let idx = order[j];
            on_front[idx] = points[idx].fairness == group_min && group_min < best_above;
            j += 1;
        }
        best_above = best_above.min(group_min);
        i = j;
    }

    let mut counts: BTreeMap<String, usize> = points.iter().map(|p| (p.approach.clone(), 0)).collect();
    let indices: Vec<usize> = (0..points.len()).filter(|&i| on_front[i]).collect();
    for &i in &indices {
        *counts.get_mut(&points[i].approach).expect("approach registered") += 1;
    }
    Ok(ParetoFront { indices, counts })
}
