//! Append-only JSON-lines score cache.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{language_attributes, Attribute, PerspectiveScores, Scorer, Variant};
use crate::error::{Error, Result};
use crate::ingest::Language;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
struct Key {
    text_sha256: String,
    language: Language,
    attributes: String,
    variant: Variant,
}

impl Key {
    fn new(text: &str, language: Language, attributes: &[Attribute], variant: Variant) -> Self {
        let mut attrs: Vec<&str> = attributes.iter().map(|a| a.api_name()).collect();
        attrs.sort_unstable();
        Key {
            text_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            language,
            attributes: attrs.join(","),
            variant,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    #[serde(flatten)]
    key: Key,
    scores: BTreeMap<Attribute, f64>,
}

pub struct ScoreCache {
    path: PathBuf,
    entries: Mutex<HashMap<Key, PerspectiveScores>>,
    writer: Mutex<File>,
    skipped: usize,
}

impl ScoreCache {
    /// Loads every valid line of `path` (created if missing). Unreadable
    /// lines are skipped with a warning, so their texts are fetched again.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Line>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(|l| PerspectiveScores::new(l.scores).map(|s| (l.key, s)).map_err(|e| e.to_string()))
                {
                    Ok((key, scores)) => {
                        entries.insert(key, scores);
                    }
                    Err(e) => {
                        skipped += 1;
                        log::warn!("{}:{}: skipping corrupt cache line ({e})", path.display(), n + 1);
                    }
                }
            }
        }
        let mut writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let ends_mid_line = std::fs::read(&path)
            .map_err(|e| Error::io(&path, e))?
            .last()
            .is_some_and(|&b| b != b'\n');
        if ends_mid_line {
            writeln!(writer).map_err(|e| Error::io(&path, e))?;
        }
        Ok(ScoreCache {
            path,
            entries: Mutex::new(entries),
            writer: Mutex::new(writer),
            skipped,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lines ignored while loading.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn get(&self, text: &str, language: Language, attributes: &[Attribute], variant: Variant) -> Option<PerspectiveScores> {
        self.entries
            .lock()
            .unwrap()
            .get(&Key::new(text, language, attributes, variant))
            .cloned()
    }

    pub fn put(
        &self,
        text: &str,
        language: Language,
        attributes: &[Attribute],
        variant: Variant,
        scores: &PerspectiveScores,
    ) -> Result<()> {
        let key = Key::new(text, language, attributes, variant);
        let line = serde_json::to_string(&Line {
            key: key.clone(),
            scores: scores.0.clone(),
        })?;
        {
            let mut w = self.writer.lock().unwrap();
            writeln!(w, "{line}").map_err(|e| Error::io(&self.path, e))?;
        }
        self.entries.lock().unwrap().insert(key, scores.clone());
        Ok(())
    }
}

/// Read-through cache in front of another scorer. With no cache every call
/// goes to the inner scorer.
pub struct CachedScorer<S> {
    inner: S,
    cache: Option<ScoreCache>,
}

impl<S: Scorer> CachedScorer<S> {
    pub fn new(inner: S, cache: Option<ScoreCache>) -> Self {
        CachedScorer { inner, cache }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn cache(&self) -> Option<&ScoreCache> {
        self.cache.as_ref()
    }
}

impl<S: Scorer> Scorer for CachedScorer<S> {
    fn score(&self, text: &str, language: Language, variant: Variant) -> Result<PerspectiveScores> {
        let Some(cache) = &self.cache else {
            return self.inner.score(text, language, variant);
        };
        let attributes = language_attributes(language)?;
        if let Some(hit) = cache.get(text, language, &attributes, variant) {
            return Ok(hit);
        }
        let scores = self.inner.score(text, language, variant)?;
        cache.put(text, language, &attributes, variant, &scores)?;
        Ok(scores)
    }
}
