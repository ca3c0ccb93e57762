//! Feed-forward classification heads, softmax cross-entropy and optimizers.

pub mod checkpoint;
pub mod mlp;
pub mod network;
pub mod optim;

use serde::{Deserialize, Serialize};

pub use mlp::{backward, forward, Activation, DenseLayer, ForwardCache, MlpConfig, Mode, ModelParams};
pub use network::{EncoderProjection, Network};
pub use optim::{adam_step, AdamState, Optimizer, OptimizerKind};

use crate::error::Result;

/// Named row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Tensor {
            name: name.into(),
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match its shape");
        Tensor {
            name: name.into(),
            rows,
            cols,
            data,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(self.name.clone(), self.rows, self.cols)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// An ordered collection of parameter tensors. Gradients use the same type
/// and ordering as the parameters they belong to.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d += scale * s;
            }
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against class `gold`, and its gradient
/// `softmax - onehot(gold)`.
pub fn softmax_xent(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[gold];
    let mut grad = softmax(logits);
    grad[gold] -= 1.0;
    (loss, grad)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode prediction: the argmax label and the class probabilities.
pub fn predict(params: &ModelParams, x: &[f64], config: &MlpConfig) -> Result<(usize, Vec<f64>)> {
    let (logits, _) = forward(params, x, config, Mode::Eval, 0)?;
    let probs = softmax(&logits);
    Ok((argmax(&probs), probs))
}
