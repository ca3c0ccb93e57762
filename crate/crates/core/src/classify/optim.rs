use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Adam moments, step counter and hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P, lr: f64, adam_eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps,
        }
    }
}

fn check_grads<P: ParamSet>(params: &P, grads: &P) -> Result<()> {
    let (p, g) = (params.tensors(), grads.tensors());
    if p.len() != g.len() {
        return Err(Error::Dimension(format!("{} gradient tensors for {} parameters", g.len(), p.len())));
    }
    for (pt, gt) in p.iter().zip(&g) {
        if pt.shape() != gt.shape() {
            return Err(Error::Dimension(format!("gradient shape mismatch for {}", pt.name)));
        }
        if gt.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", pt.name)));
        }
    }
    Ok(())
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    check_grads(params, grads)?;
    if !(state.lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {}", state.lr)));
    }
    if state.m.len() != grads.tensors().len() {
        return Err(Error::Dimension("optimizer state does not match parameters".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.adam_eps);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for k in 0..p.data.len() {
            let gk = g.data[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p.data[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Optimizer state carried through training and included in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn new<P: ParamSet>(kind: OptimizerKind, params: &P, lr: f64, adam_eps: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(params, lr, adam_eps)),
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Adam(s) => s.lr,
            Optimizer::Sgd { lr } => *lr,
        }
    }

    pub fn set_lr(&mut self, new_lr: f64) {
        match self {
            Optimizer::Adam(s) => s.lr = new_lr,
            Optimizer::Sgd { lr } => *lr = new_lr,
        }
    }

    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        match self {
            Optimizer::Adam(state) => adam_step(params, grads, state),
            Optimizer::Sgd { lr } => {
                check_grads(params, grads)?;
                params.add_scaled(grads, -*lr);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Tensor;

    #[derive(Clone, Debug, PartialEq)]
    struct Scalar(Tensor);

    impl ParamSet for Scalar {
        fn tensors(&self) -> Vec<&Tensor> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.0]
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Tensor::from_vec("w", 1, 1, vec![v]))
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(0.7);
        let mut state = AdamState::new(&p, 0.1, 1e-8);
        adam_step(&mut p, &scalar(0.0), &mut state).unwrap();
        assert_eq!(p, scalar(0.7));
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps)
        let mut p = scalar(1.0);
        let mut state = AdamState::new(&p, 0.1, 1e-8);
        adam_step(&mut p, &scalar(1.0), &mut state).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.0.data[0] - expected).abs() < 1e-15);
        assert!((p.0.data[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = scalar(0.3);
            let mut state = AdamState::new(&p, 0.01, 1e-7);
            for k in 0..50 {
                adam_step(&mut p, &scalar((k as f64 * 0.37).sin()), &mut state).unwrap();
            }
            p.0.data[0].to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = scalar(0.3);
        let mut state = AdamState::new(&p, 0.01, 1e-8);
        let err = adam_step(&mut p, &scalar(f64::NAN), &mut state).unwrap_err();
        assert!(err.to_string().contains('w'), "{err}");
        assert_eq!(state.t, 0);
        assert_eq!(p, scalar(0.3));
    }

    #[test]
    fn sgd_step() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, &p, 0.5, 1e-8);
        opt.step(&mut p, &scalar(2.0)).unwrap();
        assert_eq!(p.0.data[0], 0.0);
        opt.set_lr(0.25);
        assert_eq!(opt.lr(), 0.25);
    }
}
