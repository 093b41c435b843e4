//! Logistic regression on the same preprocessed features, trained with the
//! same loss and optimizer as the KAN.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::sigmoid;
use crate::training::{adam_step, bce_with_logits, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&p[..n]);
        self.bias = p[n];
    }
}

pub fn logistic_predict(model: &LogisticModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Mean BCE loss and its gradient `[dw_0, ..., dw_{d-1}, db]`.
pub fn logistic_loss_and_grad(model: &LogisticModel, dataset: &Dataset) -> Result<(f64, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = model.weights.len();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (x, &y) in dataset.features.iter().zip(&dataset.labels) {
        let z = model.logit(x)?;
        loss += bce_with_logits(z, y)?;
        let g = sigmoid(z) - y as f64;
        for (gj, v) in grad.iter_mut().zip(x) {
            *gj += g * v;
        }
        grad[d] += g;
    }
    let n = dataset.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Full-batch Adam from a zero initialization. The seed is recorded for
/// reproducibility reports; with a zero start the run does not consume it.
pub fn train_logistic(
    dataset: &Dataset,
    lr: f64,
    steps: usize,
    _seed: u64,
) -> Result<LogisticModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let pos = dataset.positives();
    if pos == 0 || pos == dataset.len() {
        log::warn!("logistic baseline trained on a single class");
    }
    let mut model = LogisticModel::zeros(dataset.n_features());
    let cfg = AdamConfig {
        learning_rate: lr,
        ..AdamConfig::default()
    };
    let mut params = model.params();
    let mut state = AdamState::new(params.len());
    for t in 1..=steps {
        let (_, grad) = logistic_loss_and_grad(&model, dataset)?;
        adam_step(&mut params, &grad, &mut state, t as u64, &cfg)?;
        model.set_params(&params);
    }
    Ok(model)
}
