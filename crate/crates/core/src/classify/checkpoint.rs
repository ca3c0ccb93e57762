//! Checkpoint directories: `config.json` plus one little-endian `f32` blob
//! per tensor, listed with its shape in the config's tensor manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{DenseLayer, MlpConfig, ModelParams};
use super::network::{EncoderProjection, Network};
use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProjectionMeta {
    project_hashtag: bool,
    passthrough: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointConfig {
    format: u32,
    mlp: MlpConfig,
    projection: Option<ProjectionMeta>,
    tensors: Vec<TensorEntry>,
    /// Caller-owned description of the feature pipeline, label schema, etc.
    metadata: serde_json::Value,
}

fn blob_name(index: usize, name: &str) -> String {
    format!("{index:03}_{}.f32", name.replace(['/', '\\'], "_"))
}

/// Writes `network` into `dir` (created if needed), returning the paths of
/// every file written.
pub fn save(network: &Network, dir: impl AsRef<Path>, metadata: serde_json::Value) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (i, t) in network.tensors().into_iter().enumerate() {
        let file = blob_name(i, &t.name);
        let bytes: Vec<u8> = t.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        entries.push(TensorEntry {
            name: t.name.clone(),
            rows: t.rows,
            cols: t.cols,
            file,
        });
    }
    let config = CheckpointConfig {
        format: FORMAT_VERSION,
        mlp: network.config.clone(),
        projection: network.projection.as_ref().map(|p| ProjectionMeta {
            project_hashtag: p.project_hashtag,
            passthrough: p.passthrough,
        }),
        tensors: entries,
        metadata,
    };
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, serde_json::to_string_pretty(&config)?).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn read_tensor(dir: &Path, entry: &TensorEntry) -> Result<Tensor> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != entry.rows * entry.cols * 4 {
        return Err(Error::Dimension(format!(
            "{} holds {} bytes, expected {}x{} f32",
            entry.file,
            bytes.len(),
            entry.rows,
            entry.cols
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok(Tensor::from_vec(entry.name.clone(), entry.rows, entry.cols, data))
}

/// Loads a checkpoint written by [`save`], returning the network and the
/// caller metadata.
pub fn load(dir: impl AsRef<Path>) -> Result<(Network, serde_json::Value)> {
    let dir = dir.as_ref();
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let config: CheckpointConfig = serde_json::from_str(&text)?;
    if config.format != FORMAT_VERSION {
        return Err(Error::Data(format!("unsupported checkpoint format {}", config.format)));
    }
    let mut tensors = config
        .tensors
        .iter()
        .map(|e| read_tensor(dir, e))
        .collect::<Result<Vec<_>>>()?
        .into_iter();

    let projection = match config.projection {
        Some(meta) => Some(EncoderProjection {
            weight: tensors
                .next()
                .ok_or_else(|| Error::Data("checkpoint lacks the projection tensor".into()))?,
            project_hashtag: meta.project_hashtag,
            passthrough: meta.passthrough,
        }),
        None => None,
    };
    let mut layers = Vec::new();
    while let Some(weight) = tensors.next() {
        let bias = tensors
            .next()
            .ok_or_else(|| Error::Data(format!("missing bias after {}", weight.name)))?;
        layers.push(DenseLayer { weight, bias });
    }
    let network = Network {
        projection,
        config: config.mlp,
        params: ModelParams { layers },
    };
    network.check()?;
    Ok((network, config.metadata))
}
