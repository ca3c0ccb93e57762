use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Identity, Activation::Tanh, Activation::Relu];

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative given the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
    pub dropout_p: f64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) || self.input_dim == 0 {
            return Err(Error::Config("need at least one non-empty hidden layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout_p {} not in [0,1)", self.dropout_p)));
        }
        Ok(())
    }

    /// Two hidden layers of widths `ceil(d/2)` and `ceil(d/4)`.
    pub fn two_layer_head(input_dim: usize, num_classes: usize, activation: Activation, dropout_p: f64) -> Self {
        MlpConfig {
            input_dim,
            hidden_dims: vec![input_dim.div_ceil(2), input_dim.div_ceil(4)],
            num_classes,
            activation,
            dropout_p,
        }
    }

    /// `depth` hidden layers of constant `width`.
    pub fn deep(input_dim: usize, depth: usize, width: usize, num_classes: usize, activation: Activation, dropout_p: f64) -> Self {
        MlpConfig {
            input_dim,
            hidden_dims: vec![width; depth],
            num_classes,
            activation,
            dropout_p,
        }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((h, fan_in));
            fan_in = h;
        }
        dims.push((self.num_classes, fan_in));
        dims
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out x in`
    pub weight: Tensor,
    /// `out x 1`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<DenseLayer>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .enumerate()
            .map(|(i, (out, inp))| {
                let bound = (6.0 / (out + inp) as f64).sqrt();
                let data = (0..out * inp).map(|_| rng.gen_range(-bound..=bound)).collect();
                DenseLayer {
                    weight: Tensor::from_vec(format!("layer{i}.weight"), out, inp, data),
                    bias: Tensor::zeros(format!("layer{i}.bias"), out, 1),
                }
            })
            .collect();
        Ok(ModelParams { layers })
    }

    pub fn check_shapes(&self, config: &MlpConfig) -> Result<()> {
        let dims = config.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "config has {} layers, params have {}",
                dims.len(),
                self.layers.len()
            )));
        }
        for (layer, (out, inp)) in self.layers.iter().zip(dims) {
            if (layer.weight.rows, layer.weight.cols) != (out, inp) || layer.bias.rows != out {
                return Err(Error::Dimension(format!(
                    "{} is {}x{}, expected {out}x{inp}",
                    layer.weight.name, layer.weight.rows, layer.weight.cols
                )));
            }
        }
        Ok(())
    }
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediate values kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (post-dropout for hidden layers).
    pub(crate) inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Per-unit dropout scale (0 or 1/(1-p)); `None` in eval mode.
    masks: Vec<Option<Vec<f64>>>,
}

fn affine(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    layer
        .weight
        .data
        .chunks_exact(layer.weight.cols)
        .zip(&layer.bias.data)
        .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, v)| acc + w * v))
        .collect()
}

/// Runs the network. In train mode each hidden unit is zeroed with
/// probability `dropout_p` (mask drawn from `dropout_seed`) and survivors are
/// scaled by `1/(1-p)`.
pub fn forward(
    params: &ModelParams,
    x: &[f64],
    config: &MlpConfig,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(Vec<f64>, ForwardCache)> {
    if x.len() != config.input_dim {
        return Err(Error::Dimension(format!(
            "input has length {}, expected {}",
            x.len(),
            config.input_dim
        )));
    }
    let n_hidden = params.layers.len() - 1;
    let dropout = mode == Mode::Train && config.dropout_p > 0.0;
    let mut rng = dropout.then(|| ChaCha8Rng::seed_from_u64(dropout_seed));
    let keep_scale = 1.0 / (1.0 - config.dropout_p);

    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(params.layers.len()),
        pre: Vec::with_capacity(n_hidden),
        post: Vec::with_capacity(n_hidden),
        masks: Vec::with_capacity(n_hidden),
    };
    let mut a = x.to_vec();
    for layer in &params.layers[..n_hidden] {
        let z = affine(layer, &a);
        let y: Vec<f64> = z.iter().map(|&v| config.activation.apply(v)).collect();
        let mask = rng.as_mut().map(|rng| {
            (0..y.len())
                .map(|_| {
                    if rng.gen::<f64>() < config.dropout_p {
                        0.0
                    } else {
                        keep_scale
                    }
                })
                .collect::<Vec<f64>>()
        });
        let next = match &mask {
            Some(m) => y.iter().zip(m).map(|(v, s)| v * s).collect(),
            None => y.clone(),
        };
        cache.inputs.push(std::mem::replace(&mut a, next));
        cache.pre.push(z);
        cache.post.push(y);
        cache.masks.push(mask);
    }
    let logits = affine(&params.layers[n_hidden], &a);
    cache.inputs.push(a);
    Ok((logits, cache))
}

/// Gradients of the loss w.r.t. every parameter and the input, given
/// `dlogits`.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    dlogits: &[f64],
    config: &MlpConfig,
) -> (ModelParams, Vec<f64>) {
    let mut grads = params.zeros_like();
    let mut delta = dlogits.to_vec();
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let input = &cache.inputs[l];
        let g = &mut grads.layers[l];
        let cols = layer.weight.cols;
        for (o, &d) in delta.iter().enumerate() {
            g.bias.data[o] = d;
            let row = &mut g.weight.data[o * cols..(o + 1) * cols];
            for (gw, &a) in row.iter_mut().zip(input) {
                *gw = d * a;
            }
        }
        let mut d_input = vec![0.0; cols];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &layer.weight.data[o * cols..(o + 1) * cols];
            for (di, &w) in d_input.iter_mut().zip(row) {
                *di += w * d;
            }
        }
        if l == 0 {
            return (grads, d_input);
        }
        let h = l - 1;
        delta = d_input
            .iter()
            .enumerate()
            .map(|(k, &dv)| {
                let scaled = cache.masks[h].as_ref().map_or(dv, |m| dv * m[k]);
                scaled * config.activation.derivative(cache.pre[h][k], cache.post[h][k])
            })
            .collect();
    }
    unreachable!("network has at least one layer")
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: l.weight.zeros_like(),
                    bias: l.bias.zeros_like(),
                })
                .collect(),
        }
    }
}
