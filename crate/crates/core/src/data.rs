//! Labelled tabular data with a sensitive attribute, fold plans and a
//! synthetic generator for biased data.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;

/// Immutable instance set `(X, A, Y)` plus the designated positive label.
///
/// Groups and classes are dense ids `0..n_groups` and `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    groups: Vec<usize>,
    labels: Vec<usize>,
    positive_label: usize,
    n_groups: usize,
    n_classes: usize,
    group_names: Option<Vec<String>>,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset whose group and class counts are inferred as
    /// `max id + 1`.
    pub fn new(
        features: Matrix,
        groups: Vec<usize>,
        labels: Vec<usize>,
        positive_label: usize,
    ) -> Result<Self> {
        let n_groups = groups.iter().max().map_or(0, |g| g + 1);
        let n_classes = labels.iter().max().map_or(0, |c| c + 1);
        Self::with_counts(features, groups, labels, positive_label, n_groups, n_classes)
    }

    /// Builds a dataset with explicit group and class counts. Classes may be
    /// absent from `labels`; every group must be present.
    pub fn with_counts(
        features: Matrix,
        groups: Vec<usize>,
        labels: Vec<usize>,
        positive_label: usize,
        n_groups: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::Empty("dataset"));
        }
        check_len("group ids", n, groups.len())?;
        check_len("labels", n, labels.len())?;
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::InvalidDataset(format!(
                "group id {g} outside 0..{n_groups}"
            )));
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "class id {c} outside 0..{n_classes}"
            )));
        }
        let mut seen = vec![false; n_groups];
        for &g in &groups {
            seen[g] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "group id {missing} has no rows"
            )));
        }
        if !labels.contains(&positive_label) {
            return Err(Error::InvalidDataset(format!(
                "positive label {positive_label} absent from labels"
            )));
        }
        Ok(Self {
            features,
            groups,
            labels,
            positive_label,
            n_groups,
            n_classes,
            group_names: None,
            class_names: None,
        })
    }

    /// Attaches display names for groups and classes.
    pub fn with_names(mut self, group_names: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        check_len("group names", self.n_groups, group_names.len())?;
        check_len("class names", self.n_classes, class_names.len())?;
        self.group_names = Some(group_names);
        self.class_names = Some(class_names);
        Ok(self)
    }

    /// Restricts the dataset to `rows` (in that order).
    ///
    /// Group/class counts and names are inherited from the parent, so a
    /// subset may have empty groups or lack the positive label; downstream
    /// code treats the resulting empty events as undefined.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            positive_label: self.positive_label,
            n_groups: self.n_groups,
            n_classes: self.n_classes,
            group_names: self.group_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn positive_label(&self) -> usize {
        self.positive_label
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn group_names(&self) -> Option<&[String]> {
        self.group_names.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }
}

/// Assignment of every row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Shuffles `0..n` with a seeded ChaCha8 permutation, then deals the
    /// permuted rows into `k` contiguous chunks. The first `n % k` folds
    /// receive one extra row.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("fold count {k} < 2")));
        }
        if k > n {
            return Err(Error::InvalidParameter(format!(
                "fold count {k} exceeds row count {n}"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let base = n / k;
        let extra = n % k;
        let mut assignments = vec![0; n];
        let mut pos = 0;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            for &row in &order[pos..pos + size] {
                assignments[row] = fold;
            }
            pos += size;
        }
        Ok(Self {
            k,
            seed,
            assignments,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.assignments.len()
    }

    /// Row indices (ascending) of fold `fold`.
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f == fold)
    }

    /// Row indices (ascending) of every fold except `fold`.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.rows_where(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| keep(f))
            .map(|(r, _)| r)
            .collect()
    }
}

/// Seeded k-fold plan over the rows of `dataset`.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::new(dataset.n_samples(), k, seed)
}

fn default_positive_label() -> usize {
    1
}

fn default_one() -> f64 {
    1.0
}

/// Parameters of the synthetic biased-data generator.
///
/// Groups are binary: a row belongs to group 1 with probability
/// `group_share`. Its label is `positive_label` with the group's
/// `positive_rate_per_group` probability and otherwise uniform over the
/// remaining classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K", alias = "k")]
    pub n_classes: usize,
    pub group_share: f64,
    pub positive_rate_per_group: BTreeMap<usize, f64>,
    pub noise_scale: f64,
    #[serde(default = "default_positive_label")]
    pub positive_label: usize,
    /// Mean offset of a class on its indicator features.
    #[serde(default = "default_one")]
    pub class_separation: f64,
    /// Mean offset of group 1 on the last feature.
    #[serde(default = "default_one")]
    pub group_shift: f64,
}

impl SyntheticSpec {
    /// A binary spec with the given group-1 share and per-group positive
    /// rates; `d = 4`, unit noise.
    pub fn binary(n: usize, group_share: f64, rate_group0: f64, rate_group1: f64) -> Self {
        Self {
            n,
            d: 4,
            n_classes: 2,
            group_share,
            positive_rate_per_group: [(0, rate_group0), (1, rate_group1)].into_iter().collect(),
            noise_scale: 1.0,
            positive_label: 1,
            class_separation: 1.0,
            group_shift: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("synthetic n must be >= 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("synthetic d must be >= 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidParameter("synthetic K must be >= 2".into()));
        }
        if self.positive_label >= self.n_classes {
            return Err(Error::InvalidParameter(format!(
                "positive label {} outside 0..{}",
                self.positive_label, self.n_classes
            )));
        }
        if !(self.group_share > 0.0 && self.group_share < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "group_share {} not in (0, 1)",
                self.group_share
            )));
        }
        for g in 0..2 {
            match self.positive_rate_per_group.get(&g) {
                Some(p) if (0.0..=1.0).contains(p) => {}
                Some(p) => {
                    return Err(Error::InvalidParameter(format!(
                        "positive rate {p} for group {g} not in [0, 1]"
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "missing positive rate for group {g}"
                    )))
                }
            }
        }
        if self.positive_rate_per_group.keys().any(|&g| g > 1) {
            return Err(Error::InvalidParameter(
                "positive_rate_per_group may only name groups 0 and 1".into(),
            ));
        }
        let finite = [self.noise_scale, self.class_separation, self.group_shift];
        if finite.iter().any(|v| !v.is_finite()) || self.noise_scale < 0.0 {
            return Err(Error::InvalidParameter(
                "noise_scale must be finite and >= 0; offsets must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a dataset from `spec`, deterministically in `seed`.
///
/// Feature `i` of a row with class `y` and group `a` is
/// `class_separation·[i < d−1, i mod K = y] + group_shift·a·[i = d−1] + noise_scale·z`
/// with `z` standard normal: the last feature carries only the group (when
/// `d = 1` it carries both). Fails if a group ends up empty.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.n_classes;
    let others: Vec<usize> = (0..k).filter(|&c| c != spec.positive_label).collect();
    let class_dims = spec.d.saturating_sub(1).max(1);

    let mut groups = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut data = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let group = usize::from(rng.random::<f64>() < spec.group_share);
        let rate = spec.positive_rate_per_group[&group];
        let label = if rng.random::<f64>() < rate {
            spec.positive_label
        } else {
            others[rng.random_range(0..others.len())]
        };
        for i in 0..spec.d {
            let mut x = if i < class_dims && i % k == label {
                spec.class_separation
            } else {
                0.0
            };
            if i == spec.d - 1 && group == 1 {
                x += spec.group_shift;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(x + spec.noise_scale * z);
        }
        groups.push(group);
        labels.push(label);
    }
    if !(groups.contains(&0) && groups.contains(&1)) {
        return Err(Error::InvalidParameter(format!(
            "n = {} with group_share = {} left a group empty",
            spec.n, spec.group_share
        )));
    }
    if !labels.contains(&spec.positive_label) {
        return Err(Error::InvalidParameter(format!(
            "n = {} produced no row with the positive label",
            spec.n
        )));
    }
    let features = Matrix::new(spec.n, spec.d, data)?;
    Dataset::with_counts(features, groups, labels, spec.positive_label, 2, k)
}
