//! Binary classifiers behind one train/predict contract: majority baseline,
//! multinomial Naive Bayes and L2-regularized logistic regression.
//!
//! Labels are `bool` (`true` = positive). Every tie, whether in a class
//! count, an argmax or a 0.5 threshold, resolves to negative.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureDescriptor;

/// Relative slack under which two Naive Bayes log scores count as tied.
const NB_TIE_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Majority,
    NaiveBayes,
    LogisticRegression,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Majority => "majority",
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LogisticRegression => "logistic_regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityParams {
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub alpha: f64,
    /// `[negative, positive]`.
    pub log_priors: [f64; 2],
    /// `[negative, positive]`, each of length = feature dimension.
    pub log_likelihoods: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticRegressionConfig {
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Training stops once the gradient's max-norm drops below this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_l2() -> f64 {
    1e-4
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_max_epochs() -> usize {
    500
}
fn default_tolerance() -> f64 {
    1e-5
}

impl Default for LogisticRegressionConfig {
    fn default() -> Self {
        LogisticRegressionConfig {
            l2: default_l2(),
            learning_rate: default_learning_rate(),
            max_epochs: default_max_epochs(),
            tolerance: default_tolerance(),
        }
    }
}

impl LogisticRegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2", "must be a finite value >= 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be a finite value > 0"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::config("tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegressionParams {
    pub config: LogisticRegressionConfig,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Majority(MajorityParams),
    NaiveBayes(NaiveBayesParams),
    LogisticRegression(LogisticRegressionParams),
}

/// A fitted classifier plus the feature dimension it accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub dim: usize,
    pub params: ModelParams,
    /// How input rows were produced; lets a saved model be re-applied to raw text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureDescriptor>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(flatten)]
    model: TrainedModel,
}

const MODEL_FORMAT: &str = "facetrec-model/1";

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Majority(_) => ModelKind::Majority,
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
        }
    }

    pub fn with_features(mut self, features: FeatureDescriptor) -> Self {
        self.features = Some(features);
        self
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse("model file", e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::parse(
                "model file",
                format!("unsupported format `{}`", file.format),
            ));
        }
        let model = file.model;
        let dims_ok = match &model.params {
            ModelParams::Majority(_) => true,
            ModelParams::NaiveBayes(nb) => nb.log_likelihoods.iter().all(|l| l.len() == model.dim),
            ModelParams::LogisticRegression(lr) => lr.weights.len() == model.dim,
        };
        if !dims_ok {
            return Err(Error::parse(
                "model file",
                "parameter arrays disagree with `dim`",
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<bool>,
    /// Majority: the constant label as 0/1. Naive Bayes: positive minus
    /// negative log score. Logistic regression: positive-class probability.
    pub scores: Vec<f64>,
}

fn check_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<usize> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    let dim = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: bad.len(),
        });
    }
    Ok(dim)
}

fn require_both_classes(labels: &[bool]) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Training(
            "training data must contain both classes".into(),
        ));
    }
    Ok(())
}

pub fn train_majority(labels: &[bool], dim: usize) -> Result<TrainedModel> {
    if labels.is_empty() {
        return Err(Error::Training("no training labels".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok(TrainedModel {
        dim,
        params: ModelParams::Majority(MajorityParams {
            label: 2 * pos > labels.len(),
        }),
        features: None,
    })
}

pub fn train_naive_bayes(rows: &[Vec<f64>], labels: &[bool], alpha: f64) -> Result<TrainedModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(
            "alpha",
            "smoothing must be a finite value > 0",
        ));
    }
    let dim = check_rows(rows, labels)?;
    require_both_classes(labels)?;
    if rows.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::Training(
            "Naive Bayes needs finite, non-negative feature values".into(),
        ));
    }

    let mut counts = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (row, &label) in rows.iter().zip(labels) {
        let c = usize::from(label);
        docs[c] += 1;
        for (acc, &v) in counts[c].iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n = labels.len() as f64;
    let log_priors = [(docs[0] as f64 / n).ln(), (docs[1] as f64 / n).ln()];
    let log_likelihoods = counts.map(|class_counts| {
        let total: f64 = class_counts.iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        class_counts
            .iter()
            .map(|&c| (c + alpha).ln() - denom)
            .collect()
    });
    Ok(TrainedModel {
        dim,
        params: ModelParams::NaiveBayes(NaiveBayesParams {
            alpha,
            log_priors,
            log_likelihoods,
        }),
        features: None,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized mean logistic loss and its gradient at `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
}

impl Objective {
    pub fn grad_max_norm(&self) -> f64 {
        self.grad_weights
            .iter()
            .fold(self.grad_bias.abs(), |m, g| m.max(g.abs()))
    }
}

/// `mean(ln(1 + e^z) - y z) + (l2 / 2) |w|^2` with `z = w.x + b`; the bias is
/// not regularized.
pub fn logistic_objective(
    rows: &[Vec<f64>],
    labels: &[bool],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> Objective {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad_weights = vec![0.0; weights.len()];
    let mut grad_bias = 0.0;
    for (row, &label) in rows.iter().zip(labels) {
        let z = dot(weights, row) + bias;
        let y = if label { 1.0 } else { 0.0 };
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        grad_bias += residual;
        for (g, &x) in grad_weights.iter_mut().zip(row) {
            *g += residual * x;
        }
    }
    let norm_sq: f64 = weights.iter().map(|w| w * w).sum();
    for (g, &w) in grad_weights.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    Objective {
        loss: loss / n + 0.5 * l2 * norm_sq,
        grad_weights,
        grad_bias: grad_bias / n,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_logistic_regression(
    rows: &[Vec<f64>],
    labels: &[bool],
    config: &LogisticRegressionConfig,
) -> Result<TrainedModel> {
    train_logistic_regression_traced(rows, labels, config).map(|(m, _)| m)
}

/// Full-batch gradient descent from zero; also returns the loss at every
/// visited iterate (initial point included).
pub fn train_logistic_regression_traced(
    rows: &[Vec<f64>],
    labels: &[bool],
    config: &LogisticRegressionConfig,
) -> Result<(TrainedModel, Vec<f64>)> {
    config.validate()?;
    let dim = check_rows(rows, labels)?;
    require_both_classes(labels)?;
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training(
            "feature matrix has a non-finite entry".into(),
        ));
    }

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut trace = Vec::with_capacity(config.max_epochs + 1);
    let mut epochs_run = 0;
    loop {
        let obj = logistic_objective(rows, labels, &weights, bias, config.l2);
        if !obj.loss.is_finite() {
            return Err(Error::Training(format!(
                "loss diverged after {epochs_run} epochs; try a smaller learning rate than {}",
                config.learning_rate
            )));
        }
        trace.push(obj.loss);
        if epochs_run == config.max_epochs || obj.grad_max_norm() < config.tolerance {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&obj.grad_weights) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * obj.grad_bias;
        epochs_run += 1;
    }

    let model = TrainedModel {
        dim,
        params: ModelParams::LogisticRegression(LogisticRegressionParams {
            config: *config,
            weights,
            bias,
            epochs_run,
        }),
        features: None,
    };
    Ok((model, trace))
}

pub fn predict(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<Predictions> {
    if let Some(bad) = rows.iter().find(|r| r.len() != model.dim) {
        return Err(Error::Dimension {
            expected: model.dim,
            actual: bad.len(),
        });
    }
    let (labels, scores) = match &model.params {
        ModelParams::Majority(p) => rows
            .iter()
            .map(|_| (p.label, if p.label { 1.0 } else { 0.0 }))
            .unzip(),
        ModelParams::NaiveBayes(p) => rows
            .iter()
            .map(|row| {
                let neg = p.log_priors[0] + dot(&p.log_likelihoods[0], row);
                let pos = p.log_priors[1] + dot(&p.log_likelihoods[1], row);
                let slack = NB_TIE_RELATIVE * neg.abs().max(pos.abs()).max(1.0);
                (pos - neg > slack, pos - neg)
            })
            .unzip(),
        ModelParams::LogisticRegression(p) => rows
            .iter()
            .map(|row| {
                let z = dot(&p.weights, row) + p.bias;
                (z > 0.0, sigmoid(z))
            })
            .unzip(),
    };
    Ok(Predictions { labels, scores })
}
