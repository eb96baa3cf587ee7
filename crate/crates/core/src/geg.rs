//! Generalized exponentiated gradient.
//!
//! The solver plays a zero-sum game between a learner and an auditor. Each
//! round the auditor turns its state `θ` into multipliers `λ` on the
//! scaled simplex `{λ ≥ 0, ‖λ‖₁ ≤ B}`. The learner answers with a
//! cost-sensitive fit (relabelled, reweighted training data). The auditor
//! then moves `θ` along the observed constraint violations. The answer is
//! the visit-count mixture of every classifier the learner produced. The
//! loop stops once the duality gap of the mixture drops below `ν`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    constraint_violations, estimate_moments, per_sample_fairness_signal, ConstraintSystem,
};
use crate::data::Dataset;
use crate::error::{check_finite, check_len, Error, Result};
use crate::learners::{argmax, Classifier, CostSensitiveOracle};
use crate::matrix::Matrix;

/// How a mixture turns member outputs into one label per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictionMode {
    /// Argmax of the mixture-weighted average of member scores.
    ExpectedVote,
    /// Each row is labelled by one member drawn from the mixture.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GegConfig {
    /// Dual learning rate `η`.
    pub eta: f64,
    /// Budget parameter; the multipliers live in an ℓ1 ball of radius `1/δ`.
    pub delta: f64,
    /// Duality-gap threshold `ν`.
    pub nu: f64,
    pub max_iter: usize,
    pub t_min: usize,
    pub prediction: PredictionMode,
}

impl Default for GegConfig {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            delta: 0.05,
            nu: 1e-3,
            max_iter: 50,
            t_min: 5,
            prediction: PredictionMode::ExpectedVote,
        }
    }
}

impl GegConfig {
    pub fn budget(&self) -> f64 {
        1.0 / self.delta
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("delta", self.delta), ("nu", self.nu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        if self.t_min == 0 || self.t_min > self.max_iter {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= t_min ({}) <= max_iter ({})",
                self.t_min, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Auditor state: unconstrained parameters `θ` and the budget `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    theta: Vec<f64>,
    budget: f64,
}

impl DualState {
    /// `θ = 0`.
    pub fn new(n_constraints: usize, budget: f64) -> Self {
        Self {
            theta: vec![0.0; n_constraints],
            budget,
        }
    }

    pub fn from_theta(theta: Vec<f64>, budget: f64) -> Result<Self> {
        check_finite("theta", &theta)?;
        Ok(Self { theta, budget })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn lambda(&self) -> Vec<f64> {
        dual_weights(self)
    }
}

/// `λ_i = B·exp(θ_i) / (1 + Σ_k exp(θ_k))`.
///
/// All exponentials (including the slack's `exp(0)`) are shifted by
/// `max(0, max θ)`, so the result is overflow-free and `Σλ ≤ B`.
pub fn dual_weights(state: &DualState) -> Vec<f64> {
    let shift = state.theta.iter().copied().fold(0.0, f64::max);
    let num: Vec<f64> = state.theta.iter().map(|t| libm::exp(t - shift)).collect();
    let denom = libm::exp(-shift) + num.iter().sum::<f64>();
    let mut lambda: Vec<f64> = num.iter().map(|v| state.budget * v / denom).collect();
    // rounding can push the sum a few ulps past B when the slack underflows
    while lambda.iter().sum::<f64>() > state.budget {
        lambda.iter_mut().for_each(|l| *l *= 1.0 - 4.0 * f64::EPSILON);
    }
    lambda
}

/// `θ_i ← θ_i + η·(γ_i − ε_i)`.
pub fn dual_update(state: &DualState, violations: &[f64], eps: &[f64], eta: f64) -> Result<DualState> {
    check_len("violations", state.theta.len(), violations.len())?;
    check_len("tolerances", state.theta.len(), eps.len())?;
    check_finite("violations", violations)?;
    check_finite("tolerances", eps)?;
    let theta = state
        .theta
        .iter()
        .zip(violations.iter().zip(eps))
        .map(|(t, (g, e))| t + eta * (g - e))
        .collect();
    Ok(DualState {
        theta,
        budget: state.budget,
    })
}

/// The weighted classification problem handed to the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSensitiveProblem {
    /// `w_j` before normalization.
    pub signed_weights: Vec<f64>,
    /// `ỹ_j`.
    pub labels: Vec<usize>,
    /// `N·|w_j| / Σ_k |w_k|` (all ones if every `w_j` is zero).
    pub weights: Vec<f64>,
}

/// Signed weights, adjusted labels and normalized weights for multipliers
/// `lambda`.
///
/// `w_j = e_j − Σ_i λ_i·s_ij`, where `e_j` is `+1` when `y_j = y_p` and `−1`
/// otherwise, and `s_ij` is the per-sample fairness signal: the increase
/// of `γ_i` when row `j` predicts `y_p`. So `w_j` is how much cheaper
/// predicting `y_p` on row `j` is than predicting anything else, under
/// `L(h, λ)`. Rows with `w_j > 0` are relabelled `y_p`. Positive rows with
/// `w_j < 0` are cheaper to predict as anything but `y_p`; they get the
/// most frequent non-positive label. All other rows keep their label.
pub fn build_cost_sensitive_problem(
    lambda: &[f64],
    dataset: &Dataset,
    fair_signal: &Matrix,
) -> Result<CostSensitiveProblem> {
    let n = dataset.n_samples();
    check_len("fairness signal rows", lambda.len(), fair_signal.rows())?;
    if !lambda.is_empty() {
        check_len("fairness signal columns", n, fair_signal.cols())?;
    }
    check_finite("lambda", lambda)?;
    let y_p = dataset.positive_label();
    let mut signed: Vec<f64> = dataset
        .labels()
        .iter()
        .map(|&y| if y == y_p { 1.0 } else { -1.0 })
        .collect();
    for (i, &l) in lambda.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        for (w, s) in signed.iter_mut().zip(fair_signal.row(i)) {
            *w -= l * s;
        }
    }
    let fallback = negative_label(dataset);
    let labels = signed
        .iter()
        .zip(dataset.labels())
        .map(|(&w, &y)| match (w > 0.0, y == y_p) {
            (true, _) => y_p,
            (false, false) => y,
            (false, true) if w < 0.0 => fallback,
            (false, true) => y,
        })
        .collect();
    let total: f64 = signed.iter().map(|w| w.abs()).sum();
    let weights = if total > 0.0 {
        signed.iter().map(|w| n as f64 * w.abs() / total).collect()
    } else {
        vec![1.0; n]
    };
    Ok(CostSensitiveProblem {
        signed_weights: signed,
        labels,
        weights,
    })
}

/// Most frequent label other than the positive one, lowest id on ties.
fn negative_label(dataset: &Dataset) -> usize {
    let y_p = dataset.positive_label();
    let mut counts = vec![0usize; dataset.n_classes()];
    for &y in dataset.labels() {
        counts[y] += 1;
    }
    (0..counts.len())
        .filter(|&c| c != y_p)
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .unwrap_or(y_p)
}

/// `L = risk + Σ_i λ_i·(γ_i − ε_i)`.
pub fn lagrangian(risk: f64, violations: &[f64], lambda: &[f64], eps: &[f64]) -> Result<f64> {
    check_len("violations", lambda.len(), violations.len())?;
    check_len("tolerances", lambda.len(), eps.len())?;
    Ok(risk
        + lambda
            .iter()
            .zip(violations.iter().zip(eps))
            .map(|(l, (g, e))| l * (g - e))
            .sum::<f64>())
}

/// Training-set risk and constraint values of one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberStats {
    /// Empirical 0-1 error against the true labels.
    pub risk: f64,
    /// `γ̂(h)`.
    pub violations: Vec<f64>,
}

impl MemberStats {
    pub fn lagrangian(&self, lambda: &[f64], eps: &[f64]) -> Result<f64> {
        lagrangian(self.risk, &self.violations, lambda, eps)
    }
}

/// Evaluates `classifier` on the training data of `dataset`.
pub fn evaluate_member<C: Classifier>(
    classifier: &C,
    dataset: &Dataset,
    system: &ConstraintSystem,
) -> Result<MemberStats> {
    let predictions = classifier.predict(dataset.features())?;
    member_stats(&predictions, dataset, system)
}

fn member_stats(predictions: &[usize], dataset: &Dataset, system: &ConstraintSystem) -> Result<MemberStats> {
    let errors = predictions
        .iter()
        .zip(dataset.labels())
        .filter(|(p, y)| p != y)
        .count();
    let mu = estimate_moments(predictions, dataset, system.moments())?;
    Ok(MemberStats {
        risk: errors as f64 / dataset.n_samples() as f64,
        violations: constraint_violations(system, &mu.values)?,
    })
}

/// A distribution over fitted classifiers, stored as visit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureClassifier<C> {
    members: Vec<C>,
    counts: Vec<u64>,
    fingerprints: Vec<u64>,
    stats: Vec<MemberStats>,
}

impl<C> Default for MixtureClassifier<C> {
    fn default() -> Self {
        Self {
            members: Vec::new(),
            counts: Vec::new(),
            fingerprints: Vec::new(),
            stats: Vec::new(),
        }
    }
}

impl<C: Classifier + PartialEq> MixtureClassifier<C> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one visit of `member`; an identical classifier already in the
    /// mixture has its count incremented instead. Returns its index.
    pub fn add(&mut self, member: C, stats: MemberStats) -> usize {
        let fp = member.fingerprint();
        if let Some(i) = (0..self.members.len()).find(|&i| self.fingerprints[i] == fp && self.members[i] == member) {
            self.counts[i] += 1;
            return i;
        }
        self.members.push(member);
        self.counts.push(1);
        self.fingerprints.push(fp);
        self.stats.push(stats);
        self.members.len() - 1
    }
}

impl<C> MixtureClassifier<C> {
    pub fn members(&self) -> &[C] {
        &self.members
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn stats(&self) -> &[MemberStats] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Counts normalized to sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// `R̂(Q)`.
    pub fn risk(&self) -> f64 {
        self.weights().iter().zip(&self.stats).map(|(w, s)| w * s.risk).sum()
    }

    /// `γ̂(Q)`.
    pub fn violations(&self) -> Vec<f64> {
        let n = self.stats.first().map_or(0, |s| s.violations.len());
        let mut out = vec![0.0; n];
        for (w, s) in self.weights().iter().zip(&self.stats) {
            for (o, v) in out.iter_mut().zip(&s.violations) {
                *o += w * v;
            }
        }
        out
    }
}

/// Two-sided duality gap of `(Q, λ̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityGap {
    /// `max_{λ ∈ Λ} L(Q, λ)`.
    pub upper: f64,
    /// Best known `L(h, λ̄)`.
    pub lower: f64,
    pub gap: f64,
    /// Whether a negative raw value was clamped to zero.
    pub clamped: bool,
}

/// `max_{λ∈Λ} L(Q, λ) − min_h L(h, λ̄)`.
///
/// The maximum over the ℓ1 ball has the closed form
/// `R̂(Q) + B·max(0, max_i(γ̂_i(Q) − ε_i))`. The minimum over `h` is
/// estimated by the smaller of `L(best_response, λ̄)` and the Lagrangian of
/// every mixture member. The members are also candidates, so the estimate
/// never exceeds `L(Q, λ̄)`.
pub fn duality_gap<C: Classifier>(
    mixture: &MixtureClassifier<C>,
    lambda_bar: &[f64],
    best_response: &MemberStats,
    eps: &[f64],
    budget: f64,
) -> Result<DualityGap> {
    if mixture.is_empty() {
        return Err(Error::Empty("mixture"));
    }
    let violations = mixture.violations();
    check_len("lambda", violations.len(), lambda_bar.len())?;
    check_len("tolerances", violations.len(), eps.len())?;
    let worst = violations
        .iter()
        .zip(eps)
        .map(|(g, e)| g - e)
        .fold(0.0, f64::max);
    let upper = mixture.risk() + budget * worst;
    let mut lower = best_response.lagrangian(lambda_bar, eps)?;
    for s in mixture.stats() {
        lower = lower.min(s.lagrangian(lambda_bar, eps)?);
    }
    let raw = upper - lower;
    let clamped = raw < 0.0;
    if raw < -1e-9 {
        log::warn!("duality gap {raw:e} is negative; clamped to 0");
    }
    Ok(DualityGap {
        upper,
        lower,
        gap: raw.max(0.0),
        clamped,
    })
}

/// One round of the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `λ⁽ᵗ⁾` used to build this round's problem.
    pub lambda: Vec<f64>,
    /// Running average of `λ` up to and including this round.
    pub lambda_bar: Vec<f64>,
    /// `R̂(h_t)`.
    pub risk: f64,
    /// `γ̂(h_t)`.
    pub violations: Vec<f64>,
    /// `L(h_t, λ⁽ᵗ⁾)`.
    pub lagrangian: f64,
    pub gap: f64,
    /// Distinct classifiers in the mixture after this round.
    pub members: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// Whether the gap criterion ended the run before `max_iter`.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl IterationTrace {
    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.gap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GegFit<C> {
    pub mixture: MixtureClassifier<C>,
    pub trace: IterationTrace,
    pub dual: DualState,
}

/// Runs the solver on `dataset` under `system` with `oracle` as learner.
///
/// Each round `t`: compute `λ⁽ᵗ⁾`, build the cost-sensitive problem, fit
/// `h_t`, add it to the mixture, update `θ` with `γ̂(h_t)`, then measure the
/// duality gap of the mixture against the averaged multipliers `λ̄`, which
/// costs one more oracle fit whenever `λ̄ ≠ λ⁽ᵗ⁾`. The run stops once
/// the gap is below `ν` and `t ≥ t_min`. An empty constraint system runs a
/// single round: plain weighted risk minimization.
pub fn fit<O: CostSensitiveOracle>(
    dataset: &Dataset,
    system: &ConstraintSystem,
    oracle: &O,
    config: &GegConfig,
) -> Result<GegFit<O::Model>> {
    config.validate()?;
    system.check_compatible(dataset)?;
    let n = system.n_constraints();
    let budget = config.budget();
    let eps = system.eps();
    let signal = per_sample_fairness_signal(system, dataset)?;
    let mut trace = IterationTrace::default();
    if !signal.undefined.is_empty() {
        trace.warnings.push(format!(
            "moments {:?} have empty conditioning events on the training data and are treated as 0",
            signal.undefined
        ));
    }

    let mut state = DualState::new(n, budget);
    let mut mixture = MixtureClassifier::new();
    let mut lambda_sum = vec![0.0; n];
    let mut clamped = 0usize;
    let features = dataset.features();
    let with_iteration = |iteration: usize| move |e: Error| Error::Oracle {
        iteration,
        source: alloc::boxed::Box::new(e),
    };

    for t in 1..=config.max_iter {
        let lambda = state.lambda();
        for (s, l) in lambda_sum.iter_mut().zip(&lambda) {
            *s += l;
        }
        let lambda_bar: Vec<f64> = lambda_sum.iter().map(|s| s / t as f64).collect();

        let problem = build_cost_sensitive_problem(&lambda, dataset, &signal.matrix)?;
        let h = oracle
            .fit(features, &problem.labels, &problem.weights)
            .map_err(with_iteration(t))?;
        let stats = evaluate_member(&h, dataset, system)?;
        let value = stats.lagrangian(&lambda, eps)?;
        let violations = stats.violations.clone();
        let risk = stats.risk;
        mixture.add(h, stats.clone());

        state = dual_update(&state, &violations, eps, config.eta)?;

        let br_stats = if lambda_bar == lambda {
            stats
        } else {
            let br_problem = build_cost_sensitive_problem(&lambda_bar, dataset, &signal.matrix)?;
            let br = oracle
                .fit(features, &br_problem.labels, &br_problem.weights)
                .map_err(with_iteration(t))?;
            evaluate_member(&br, dataset, system)?
        };
        let gap = duality_gap(&mixture, &lambda_bar, &br_stats, eps, budget)?;
        clamped += usize::from(gap.clamped);
        log::debug!(
            "iteration {t}: risk {risk:.4}, lagrangian {value:.4}, gap {:.6}, members {}",
            gap.gap,
            mixture.len()
        );
        trace.records.push(IterationRecord {
            t,
            lambda,
            lambda_bar,
            risk,
            violations,
            lagrangian: value,
            gap: gap.gap,
            members: mixture.len(),
        });

        if n == 0 {
            break;
        }
        if gap.gap < config.nu && t >= config.t_min {
            trace.converged = t < config.max_iter;
            break;
        }
    }
    if clamped > 0 {
        trace
            .warnings
            .push(format!("{clamped} negative duality gap value(s) clamped to 0"));
    }
    Ok(GegFit {
        mixture,
        trace,
        dual: state,
    })
}

impl<C: Classifier> GegFit<C> {
    pub fn predict(&self, features: &Matrix, mode: PredictionMode) -> Result<Vec<usize>> {
        mixture_predict(&self.mixture, features, mode)
    }
}

/// Labels `features` with the mixture.
///
/// Expected vote takes the argmax of `Σ_t q_t·scores_t`, ties to the
/// lowest class id. Sampled mode draws a member per row from `q` with a
/// ChaCha8 stream seeded by `seed` and uses that member's label.
pub fn mixture_predict<C: Classifier>(
    mixture: &MixtureClassifier<C>,
    features: &Matrix,
    mode: PredictionMode,
) -> Result<Vec<usize>> {
    if mixture.is_empty() {
        return Err(Error::Empty("mixture"));
    }
    let weights = mixture.weights();
    match mode {
        PredictionMode::ExpectedVote => {
            let k = mixture.members[0].n_classes();
            let mut total = Matrix::zeros(features.rows(), k);
            for (member, &w) in mixture.members.iter().zip(&weights) {
                let scores = member.predict_scores(features)?;
                check_len("mixture member classes", k, scores.cols())?;
                for r in 0..features.rows() {
                    for (acc, s) in total.row_mut(r).iter_mut().zip(scores.row(r)) {
                        *acc += w * s;
                    }
                }
            }
            Ok(total.iter_rows().map(argmax).collect())
        }
        PredictionMode::Sampled { seed } => {
            let predictions: Vec<Vec<usize>> = mixture
                .members
                .iter()
                .map(|m| m.predict(features))
                .collect::<Result<_>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..features.rows())
                .map(|r| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut pick = weights.len() - 1;
                    for (i, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            pick = i;
                            break;
                        }
                    }
                    predictions[pick][r]
                })
                .collect())
        }
    }
}
