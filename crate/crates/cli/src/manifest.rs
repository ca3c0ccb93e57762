//! Run manifests: what was run, on which inputs, producing which files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use hatedetect_core::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub started_unix: u64,
    pub elapsed_secs: f64,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_secs: 0.0,
            clock: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        self.elapsed_secs = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        let text = serde_json::to_string_pretty(&self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
