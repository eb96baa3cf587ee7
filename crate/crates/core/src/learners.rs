//! Cost-sensitive classification oracles.
//!
//! The solver only needs something that fits a classifier to weighted,
//! relabelled data ([`CostSensitiveOracle`]). The provided oracle is a
//! multinomial logistic regression trained by full-batch gradient descent on
//! the weighted cross-entropy, the usual convex surrogate of the weighted
//! 0-1 loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::matrix::Matrix;

/// A fitted model over classes `0..n_classes`.
pub trait Classifier {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    /// `N × n_classes` row-stochastic scores.
    fn predict_scores(&self, features: &Matrix) -> Result<Matrix>;

    /// Argmax of the scores, ties going to the lowest class id.
    fn predict(&self, features: &Matrix) -> Result<Vec<usize>> {
        let scores = self.predict_scores(features)?;
        Ok(scores.iter_rows().map(argmax).collect())
    }

    /// Hash of the fitted parameters; equal models have equal fingerprints.
    fn fingerprint(&self) -> u64;
}

/// Fits a classifier to `(features, labels)` with nonnegative per-row weights.
pub trait CostSensitiveOracle {
    type Model: Classifier + Clone + PartialEq;

    fn fit(&self, features: &Matrix, labels: &[usize], weights: &[f64]) -> Result<Self::Model>;
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfig {
    /// Ridge penalty on the coefficients (intercepts are not penalized).
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_epochs: 1000,
            tol: 1e-8,
            step: 1.0,
            seed: 0,
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("l2 = {} must be >= 0", self.l2)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be > 0", self.tol)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidParameter(format!("step = {} must be > 0", self.step)));
        }
        Ok(())
    }
}

/// Mean-normalized weighted cross-entropy plus a ridge term,
///
/// `Σ_j w_j·(logsumexp(z_j) − z_{j,t_j}) / Σ_j w_j + l2·‖W‖²`, with logits
/// `z_j = W·x_j + b`.
///
/// Parameters are laid out as `W` row-major (`outputs × d`) followed by `b`.
pub struct WeightedSoftmaxObjective<'a> {
    features: &'a Matrix,
    targets: &'a [usize],
    weights: &'a [f64],
    outputs: usize,
    l2: f64,
    weight_sum: f64,
}

impl<'a> WeightedSoftmaxObjective<'a> {
    pub fn new(
        features: &'a Matrix,
        targets: &'a [usize],
        weights: &'a [f64],
        outputs: usize,
        l2: f64,
    ) -> Result<Self> {
        check_len("targets", features.rows(), targets.len())?;
        check_len("weights", features.rows(), weights.len())?;
        if targets.iter().any(|&t| t >= outputs) {
            return Err(Error::InvalidParameter("target outside the output range".into()));
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Ok(Self {
            features,
            targets,
            weights,
            outputs,
            l2,
            weight_sum,
        })
    }

    pub fn n_params(&self) -> usize {
        self.outputs * (self.features.cols() + 1)
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.evaluate(params, false).0
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(params, true)
    }

    fn evaluate(&self, params: &[f64], with_grad: bool) -> (f64, Vec<f64>) {
        let d = self.features.cols();
        let c = self.outputs;
        let (coef, bias) = params.split_at(c * d);
        let mut grad = if with_grad { vec![0.0; params.len()] } else { Vec::new() };
        let mut logits = vec![0.0; c];
        let mut data_loss = 0.0;
        for (j, x) in self.features.iter_rows().enumerate() {
            let w = self.weights[j];
            if w == 0.0 {
                continue;
            }
            for k in 0..c {
                let row = &coef[k * d..(k + 1) * d];
                logits[k] = bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for z in logits.iter_mut() {
                *z = libm::exp(*z - max);
                denom += *z;
            }
            let t = self.targets[j];
            data_loss += w * (libm::log(denom) - libm::log(logits[t]));
            if with_grad {
                for k in 0..c {
                    let residual = w * (logits[k] / denom - f64::from(u8::from(k == t)));
                    let g = &mut grad[k * d..(k + 1) * d];
                    for (gi, xi) in g.iter_mut().zip(x) {
                        *gi += residual * xi;
                    }
                    grad[c * d + k] += residual;
                }
            }
        }
        let ridge: f64 = coef.iter().map(|v| v * v).sum();
        let loss = data_loss / self.weight_sum + self.l2 * ridge;
        if with_grad {
            for g in grad.iter_mut() {
                *g /= self.weight_sum;
            }
            for (g, v) in grad[..c * d].iter_mut().zip(coef) {
                *g += 2.0 * self.l2 * v;
            }
        }
        (loss, grad)
    }
}

/// Fitted multinomial logistic regression.
///
/// Scores are only produced for the classes seen during fitting
/// (`classes`); the other columns are 0. A model fitted on a single class
/// is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    n_classes: usize,
    classes: Vec<usize>,
    coefficients: Matrix,
    intercepts: Vec<f64>,
    feature_mean: Vec<f64>,
    feature_scale: Vec<f64>,
    training_loss: f64,
    epochs: usize,
}

impl SoftmaxClassifier {
    /// A model that always predicts `class`.
    pub fn constant(class: usize, n_classes: usize, n_features: usize) -> Self {
        Self {
            n_classes,
            classes: vec![class],
            coefficients: Matrix::zeros(1, n_features),
            intercepts: vec![0.0],
            feature_mean: vec![0.0; n_features],
            feature_scale: vec![1.0; n_features],
            training_loss: 0.0,
            epochs: 0,
        }
    }

    /// Class ids the score columns of the internal model map to.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Surrogate loss reached on the training data.
    pub fn training_loss(&self) -> f64 {
        self.training_loss
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn is_constant(&self) -> bool {
        self.classes.len() == 1
    }
}

impl Classifier for SoftmaxClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    fn predict_scores(&self, features: &Matrix) -> Result<Matrix> {
        let d = self.n_features();
        check_len("feature dimension", d, features.cols())?;
        let c = self.classes.len();
        let mut out = Matrix::zeros(features.rows(), self.n_classes);
        if c == 1 {
            for r in 0..features.rows() {
                out.set(r, self.classes[0], 1.0);
            }
            return Ok(out);
        }
        let mut x = vec![0.0; d];
        let mut logits = vec![0.0; c];
        for (r, raw) in features.iter_rows().enumerate() {
            for i in 0..d {
                x[i] = (raw[i] - self.feature_mean[i]) / self.feature_scale[i];
            }
            for (k, z) in logits.iter_mut().enumerate() {
                *z = self.intercepts[k] + self.coefficients.row(k).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = logits.iter().map(|z| libm::exp(z - max)).sum();
            for (k, z) in logits.iter().enumerate() {
                out.set(r, self.classes[k], libm::exp(z - max) / denom);
            }
        }
        Ok(out)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::default();
        h.write_u64(self.n_classes as u64);
        for &c in &self.classes {
            h.write_u64(c as u64);
        }
        for v in self
            .coefficients
            .as_slice()
            .iter()
            .chain(&self.intercepts)
            .chain(&self.feature_mean)
            .chain(&self.feature_scale)
        {
            h.write_u64(v.to_bits());
        }
        h.finish()
    }
}

struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv1a {
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Weighted mean and standard deviation per column; zero spread maps to 1.
fn weighted_standardization(features: &Matrix, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = features.cols();
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; d];
    for (x, &w) in features.iter_rows().zip(weights) {
        for i in 0..d {
            mean[i] += w * x[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; d];
    for (x, &w) in features.iter_rows().zip(weights) {
        for i in 0..d {
            let dx = x[i] - mean[i];
            var[i] += w * dx * dx;
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = libm::sqrt(v / total);
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Fits a weighted multinomial logistic regression by full-batch gradient
/// descent.
///
/// Features are standardized with weighted column statistics. The step is
/// halved whenever it would increase the loss, and training stops when an
/// accepted step improves the loss by less than `tol` or after
/// `max_epochs` steps. Rows with zero weight are ignored; if the remaining
/// rows carry a single class the result is a constant classifier.
pub fn fit_softmax(
    features: &Matrix,
    labels: &[usize],
    weights: &[f64],
    n_classes: usize,
    config: &SoftmaxConfig,
) -> Result<SoftmaxClassifier> {
    config.validate()?;
    let n = features.rows();
    check_len("labels", n, labels.len())?;
    check_len("weights", n, weights.len())?;
    check_finite("features", features.as_slice())?;
    check_finite("weights", weights)?;
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidParameter("all sample weights are zero".into()));
    }
    if let Some(&c) = labels.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {c} outside 0..{n_classes}")));
    }

    let mut present = vec![false; n_classes];
    for (&y, &w) in labels.iter().zip(weights) {
        if w > 0.0 {
            present[y] = true;
        }
    }
    let classes: Vec<usize> = (0..n_classes).filter(|&c| present[c]).collect();
    let d = features.cols();
    if classes.len() == 1 {
        return Ok(SoftmaxClassifier::constant(classes[0], n_classes, d));
    }

    let (feature_mean, feature_scale) = weighted_standardization(features, weights);
    let mut standardized = features.clone();
    for r in 0..n {
        let row = standardized.row_mut(r);
        for i in 0..d {
            row[i] = (row[i] - feature_mean[i]) / feature_scale[i];
        }
    }
    let mut slot = vec![usize::MAX; n_classes];
    for (k, &c) in classes.iter().enumerate() {
        slot[c] = k;
    }
    // zero-weight rows may carry classes outside `classes`; their target is unused
    let targets: Vec<usize> = labels.iter().map(|&y| slot[y].min(classes.len() - 1)).collect();
    let objective = WeightedSoftmaxObjective::new(&standardized, &targets, weights, classes.len(), config.l2)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut params: Vec<f64> = (0..objective.n_params())
        .map(|i| if i < classes.len() * d { init.sample(&mut rng) } else { 0.0 })
        .collect();

    // gradient descent with Armijo backtracking; the step grows again after
    // every accepted move
    let (mut loss, mut grad) = objective.loss_and_gradient(&params);
    let mut step = config.step;
    let mut epochs = 0;
    let mut candidate = vec![0.0; params.len()];
    while epochs < config.max_epochs {
        epochs += 1;
        let sq_norm: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            for ((c, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                *c = p - step * g;
            }
            if objective.loss(&candidate) <= loss - 1e-4 * step * sq_norm {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        core::mem::swap(&mut params, &mut candidate);
        let previous = loss;
        (loss, grad) = objective.loss_and_gradient(&params);
        step *= 2.0;
        if previous - loss < config.tol {
            break;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("softmax training loss"));
    }

    let c = classes.len();
    let coefficients = Matrix::new(c, d, params[..c * d].to_vec())?;
    let intercepts = params[c * d..].to_vec();
    Ok(SoftmaxClassifier {
        n_classes,
        classes,
        coefficients,
        intercepts,
        feature_mean,
        feature_scale,
        training_loss: loss,
        epochs,
    })
}

/// [`fit_softmax`] behind the oracle interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxOracle {
    pub n_classes: usize,
    pub config: SoftmaxConfig,
}

impl SoftmaxOracle {
    pub fn new(n_classes: usize, config: SoftmaxConfig) -> Self {
        Self { n_classes, config }
    }
}

impl CostSensitiveOracle for SoftmaxOracle {
    type Model = SoftmaxClassifier;

    fn fit(&self, features: &Matrix, labels: &[usize], weights: &[f64]) -> Result<SoftmaxClassifier> {
        let model = fit_softmax(features, labels, weights, self.n_classes, &self.config)?;
        log::trace!(
            "softmax oracle: surrogate loss {:.6} after {} epochs",
            model.training_loss(),
            model.epochs()
        );
        Ok(model)
    }
}
