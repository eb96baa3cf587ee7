//! Linear moment constraints `γ(h) = M·μ(h) ≤ ε`.
//!
//! Every moment is a conditional rate of predicting the positive label,
//! conditioned on an event that depends on the data only (a group, a true
//! label, both, or nothing). Each parity requirement `μ_a = μ_*` becomes the
//! pair of rows `μ_a − μ_* ≤ ε` and `μ_* − μ_a ≤ ε`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// No fairness constraint: the solver reduces to plain risk minimization.
    #[serde(rename = "none")]
    Unconstrained,
    /// Demographic parity on the positive label.
    #[serde(rename = "DP")]
    DemographicParity,
    /// Equalized odds on the positive label.
    #[serde(rename = "EO")]
    EqualizedOdds,
    /// Demographic parity and equalized odds stacked.
    #[serde(rename = "CP")]
    CombinedParity,
}

/// The conditioning event of one moment `E[1{h(X) = y_p} | E]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MomentDescriptor {
    /// `A = group`
    Group { group: usize },
    /// The whole population.
    Overall,
    /// `A = group, Y = label`
    GroupCond { group: usize, label: usize },
    /// `Y = label`
    OverallCond { label: usize },
}

impl MomentDescriptor {
    #[inline]
    pub fn contains(&self, group: usize, label: usize) -> bool {
        match *self {
            Self::Group { group: a } => group == a,
            Self::Overall => true,
            Self::GroupCond { group: a, label: y } => group == a && label == y,
            Self::OverallCond { label: y } => label == y,
        }
    }

    fn check(&self, n_groups: usize, n_classes: usize) -> Result<()> {
        let (group, label) = match *self {
            Self::Group { group } => (Some(group), None),
            Self::Overall => (None, None),
            Self::GroupCond { group, label } => (Some(group), Some(label)),
            Self::OverallCond { label } => (None, Some(label)),
        };
        if group.is_some_and(|a| a >= n_groups) || label.is_some_and(|y| y >= n_classes) {
            return Err(Error::InvalidParameter(alloc::format!(
                "moment {self:?} incompatible with {n_groups} groups and {n_classes} classes"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    kind: ConstraintKind,
    matrix: Matrix,
    eps: Vec<f64>,
    moments: Vec<MomentDescriptor>,
}

impl ConstraintSystem {
    /// The empty system (`n = m = 0`).
    pub fn unconstrained() -> Self {
        Self {
            kind: ConstraintKind::Unconstrained,
            matrix: Matrix::zeros(0, 0),
            eps: Vec::new(),
            moments: Vec::new(),
        }
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    /// The `n × m` coefficient matrix.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn moments(&self) -> &[MomentDescriptor] {
        &self.moments
    }

    pub fn n_constraints(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_moments(&self) -> usize {
        self.moments.len()
    }

    /// Replaces every tolerance.
    pub fn with_eps(mut self, eps: Vec<f64>) -> Result<Self> {
        check_len("constraint tolerances", self.n_constraints(), eps.len())?;
        if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::InvalidParameter("tolerances must be finite and >= 0".into()));
        }
        self.eps = eps;
        Ok(self)
    }

    /// Errors if a moment refers to a group or class the dataset cannot have.
    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        self.moments
            .iter()
            .try_for_each(|m| m.check(dataset.n_groups(), dataset.n_classes()))
    }
}

/// Appends the parity block `μ_{a} = μ_{*}` for every group, where the group
/// moments occupy columns `offset..offset+G` and the overall moment column
/// `offset+G`. Rows are emitted as (`μ_a − μ_*`, `μ_* − μ_a`) per group.
fn parity_block(rows: &mut Vec<Vec<f64>>, width: usize, offset: usize, n_groups: usize) {
    let overall = offset + n_groups;
    for a in 0..n_groups {
        let mut up = vec![0.0; width];
        up[offset + a] += 1.0;
        up[overall] -= 1.0;
        let down = up.iter().map(|v| -v).collect();
        rows.push(up);
        rows.push(down);
    }
}

fn dp_moments(n_groups: usize) -> Vec<MomentDescriptor> {
    (0..n_groups)
        .map(|group| MomentDescriptor::Group { group })
        .chain(core::iter::once(MomentDescriptor::Overall))
        .collect()
}

fn eo_moments(n_groups: usize, label: usize) -> Vec<MomentDescriptor> {
    (0..n_groups)
        .map(|group| MomentDescriptor::GroupCond { group, label })
        .chain(core::iter::once(MomentDescriptor::OverallCond { label }))
        .collect()
}

/// Builds the constraint system for `kind` over `n_groups` groups.
///
/// Equalized odds gets one block per label in `conditioning_labels` (in the
/// given order); pass `&[y_p]` for the positive-label form. Combined parity
/// stacks the demographic-parity block on top of the equalized-odds blocks.
/// Every tolerance is set to `eps_default`.
pub fn build_constraint_system(
    kind: ConstraintKind,
    n_groups: usize,
    conditioning_labels: &[usize],
    eps_default: f64,
) -> Result<ConstraintSystem> {
    if kind == ConstraintKind::Unconstrained {
        return Ok(ConstraintSystem::unconstrained());
    }
    if n_groups == 0 {
        return Err(Error::InvalidParameter("need at least one group".into()));
    }
    if !(eps_default.is_finite() && eps_default >= 0.0) {
        return Err(Error::InvalidParameter("eps_default must be finite and >= 0".into()));
    }
    let with_dp = matches!(kind, ConstraintKind::DemographicParity | ConstraintKind::CombinedParity);
    let with_eo = matches!(kind, ConstraintKind::EqualizedOdds | ConstraintKind::CombinedParity);
    if with_eo && conditioning_labels.is_empty() {
        return Err(Error::InvalidParameter(
            "equalized odds needs a nonempty conditioning label set".into(),
        ));
    }

    let mut moments = Vec::new();
    if with_dp {
        moments.extend(dp_moments(n_groups));
    }
    if with_eo {
        for &y in conditioning_labels {
            moments.extend(eo_moments(n_groups, y));
        }
    }
    let width = moments.len();
    let mut rows = Vec::new();
    let mut offset = 0;
    if with_dp {
        parity_block(&mut rows, width, offset, n_groups);
        offset += n_groups + 1;
    }
    if with_eo {
        for _ in conditioning_labels {
            parity_block(&mut rows, width, offset, n_groups);
            offset += n_groups + 1;
        }
    }
    let n = rows.len();
    Ok(ConstraintSystem {
        kind,
        matrix: Matrix::from_rows(&rows)?,
        eps: vec![eps_default; n],
        moments,
    })
}

/// Empirical moments; undefined ones (empty conditioning event) read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub values: Vec<f64>,
    /// Indices of moments whose conditioning event has no rows.
    pub undefined: Vec<usize>,
}

/// `μ_k = #{j ∈ E_k : pred_j = y_p} / |E_k|` for each descriptor.
pub fn estimate_moments(
    predictions: &[usize],
    dataset: &Dataset,
    moments: &[MomentDescriptor],
) -> Result<MomentEstimate> {
    check_len("predictions", dataset.n_samples(), predictions.len())?;
    let y_p = dataset.positive_label();
    let mut hits = vec![0usize; moments.len()];
    let mut sizes = vec![0usize; moments.len()];
    for ((&pred, &g), &y) in predictions.iter().zip(dataset.groups()).zip(dataset.labels()) {
        let positive = usize::from(pred == y_p);
        for (k, m) in moments.iter().enumerate() {
            if m.contains(g, y) {
                sizes[k] += 1;
                hits[k] += positive;
            }
        }
    }
    let mut undefined = Vec::new();
    let values = hits
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(k, (&h, &s))| {
            if s == 0 {
                undefined.push(k);
                0.0
            } else {
                h as f64 / s as f64
            }
        })
        .collect();
    if !undefined.is_empty() {
        log::warn!("moments {undefined:?} have empty conditioning events; treated as 0");
    }
    Ok(MomentEstimate { values, undefined })
}

/// `γ = M·μ`. The solver compares `γ_i` against `ε_i`.
pub fn constraint_violations(system: &ConstraintSystem, mu: &[f64]) -> Result<Vec<f64>> {
    check_len("moment vector", system.n_moments(), mu.len())?;
    if system.n_constraints() == 0 {
        return Ok(Vec::new());
    }
    system.matrix.mul_vec(mu)
}

/// Per-sample fairness signals, one row per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSignal {
    /// `n × N`; entry `(i, j)` is `N·∂γ_i/∂1{pred_j = y_p}`.
    pub matrix: Matrix,
    /// Moments with empty events; they contribute nothing.
    pub undefined: Vec<usize>,
}

/// Entry `(i, j) = Σ_k M_ik · s_kj` with `s_kj = N/|E_k|` if row `j` lies
/// in `E_k` and 0 otherwise: `N` times the change of `γ_i` when row `j`
/// switches to predicting the positive label.
pub fn per_sample_fairness_signal(system: &ConstraintSystem, dataset: &Dataset) -> Result<FairnessSignal> {
    system.check_compatible(dataset)?;
    let n = dataset.n_samples();
    let groups = dataset.groups();
    let labels = dataset.labels();
    let sizes: Vec<usize> = system
        .moments
        .iter()
        .map(|m| (0..n).filter(|&j| m.contains(groups[j], labels[j])).count())
        .collect();
    let undefined: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] == 0).collect();
    if !undefined.is_empty() {
        log::warn!("fairness signal: moments {undefined:?} have empty events; contributions set to 0");
    }
    let scale: Vec<f64> = sizes
        .iter()
        .map(|&s| if s == 0 { 0.0 } else { n as f64 / s as f64 })
        .collect();

    let mut out = Matrix::zeros(system.n_constraints(), n);
    for j in 0..n {
        for (i, row) in system.matrix.iter_rows().enumerate() {
            let value: f64 = row
                .iter()
                .zip(&system.moments)
                .zip(&scale)
                .filter(|((_, m), _)| m.contains(groups[j], labels[j]))
                .map(|((coef, _), s)| coef * s)
                .sum();
            out.set(i, j, value);
        }
    }
    Ok(FairnessSignal {
        matrix: out,
        undefined,
    })
}
