use serde::{Deserialize, Serialize};

use super::mlp::{self, ForwardCache, MlpConfig, Mode, ModelParams};
use super::{argmax, softmax, softmax_xent, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Trainable linear text encoder sitting in front of the head.
///
/// Raw inputs are laid out as `[text | hashtag? | passthrough]`, where the
/// text and hashtag slices are hashed bags of words of width `weight.cols`.
/// Both are projected with the same weights, so both contribute to their
/// gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderProjection {
    pub weight: Tensor,
    pub project_hashtag: bool,
    pub passthrough: usize,
}

impl EncoderProjection {
    fn in_dim(&self) -> usize {
        self.weight.cols
    }

    fn out_dim(&self) -> usize {
        self.weight.rows
    }

    fn raw_dim(&self) -> usize {
        self.in_dim() * (1 + usize::from(self.project_hashtag)) + self.passthrough
    }

    fn fused_dim(&self) -> usize {
        self.out_dim() * (1 + usize::from(self.project_hashtag)) + self.passthrough
    }

    fn project<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.weight
            .data
            .chunks_exact(self.in_dim())
            .map(move |row| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }

    fn fuse(&self, raw: &[f64]) -> Vec<f64> {
        let d = self.in_dim();
        let mut fused = Vec::with_capacity(self.fused_dim());
        fused.extend(self.project(&raw[..d]));
        let mut rest = d;
        if self.project_hashtag {
            fused.extend(self.project(&raw[d..2 * d]));
            rest = 2 * d;
        }
        fused.extend_from_slice(&raw[rest..]);
        fused
    }
}

/// Classifier head with an optional trainable encoder projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub projection: Option<EncoderProjection>,
    pub config: MlpConfig,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct NetCache {
    mlp: ForwardCache,
    raw: Vec<f64>,
}

impl Network {
    /// Plain MLP over precomputed features.
    pub fn head(config: MlpConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Network {
            projection: None,
            config,
            params,
        })
    }

    pub fn with_projection(projection: EncoderProjection, config: MlpConfig, seed: u64) -> Result<Self> {
        if projection.fused_dim() != config.input_dim {
            return Err(Error::Dimension(format!(
                "projection produces {} features but the head expects {}",
                projection.fused_dim(),
                config.input_dim
            )));
        }
        let params = ModelParams::init(&config, seed)?;
        Ok(Network {
            projection: Some(projection),
            config,
            params,
        })
    }

    /// Length of the raw feature vector this network consumes.
    pub fn input_dim(&self) -> usize {
        self.projection
            .as_ref()
            .map_or(self.config.input_dim, EncoderProjection::raw_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn check(&self) -> Result<()> {
        self.config.validate()?;
        self.params.check_shapes(&self.config)?;
        if let Some(p) = &self.projection {
            if p.fused_dim() != self.config.input_dim {
                return Err(Error::Dimension("projection output does not match head input".into()));
            }
        }
        Ok(())
    }

    fn fused(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has length {}, expected {}",
                raw.len(),
                self.input_dim()
            )));
        }
        Ok(match &self.projection {
            Some(p) => p.fuse(raw),
            None => raw.to_vec(),
        })
    }

    pub fn forward(&self, raw: &[f64], mode: Mode, dropout_seed: u64) -> Result<(Vec<f64>, NetCache)> {
        let fused = self.fused(raw)?;
        let (logits, cache) = mlp::forward(&self.params, &fused, &self.config, mode, dropout_seed)?;
        Ok((
            logits,
            NetCache {
                mlp: cache,
                raw: if self.projection.is_some() { raw.to_vec() } else { Vec::new() },
            },
        ))
    }

    pub fn backward(&self, cache: &NetCache, dlogits: &[f64]) -> Network {
        let (mlp_grads, d_fused) = mlp::backward(&self.params, &cache.mlp, dlogits, &self.config);
        let projection = self.projection.as_ref().map(|p| {
            let mut grad = p.clone();
            let (out, d) = (p.out_dim(), p.in_dim());
            grad.weight = p.weight.zeros_like();
            let slices = 1 + usize::from(p.project_hashtag);
            for s in 0..slices {
                let x = &cache.raw[s * d..(s + 1) * d];
                for o in 0..out {
                    let g = d_fused[s * out + o];
                    if g == 0.0 {
                        continue;
                    }
                    for (gw, &xv) in grad.weight.data[o * d..(o + 1) * d].iter_mut().zip(x) {
                        *gw += g * xv;
                    }
                }
            }
            grad
        });
        Network {
            projection,
            config: self.config.clone(),
            params: mlp_grads,
        }
    }

    /// Cross-entropy loss for one example and the gradient of every parameter.
    pub fn loss_and_grad(&self, raw: &[f64], gold: usize, mode: Mode, dropout_seed: u64) -> Result<(f64, Network)> {
        if gold >= self.num_classes() {
            return Err(Error::Dimension(format!("gold class {gold} out of range")));
        }
        let (logits, cache) = self.forward(raw, mode, dropout_seed)?;
        let (loss, dlogits) = softmax_xent(&logits, gold);
        Ok((loss, self.backward(&cache, &dlogits)))
    }

    pub fn predict(&self, raw: &[f64]) -> Result<(usize, Vec<f64>)> {
        let (logits, _) = self.forward(raw, Mode::Eval, 0)?;
        let probs = softmax(&logits);
        Ok((argmax(&probs), probs))
    }

    pub fn zeros_like(&self) -> Network {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }
}

impl ParamSet for Network {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.projection.iter().map(|p| &p.weight).collect();
        out.extend(self.params.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.projection.iter_mut().map(|p| &mut p.weight).collect();
        out.extend(self.params.tensors_mut());
        out
    }
}
