//! Toxicity-score features from a remote scoring service.
//!
//! Every tweet is scored twice, once as written and once as cleaned text,
//! and the per-attribute scores are laid out in a fixed order to form the
//! feature vector fed to the deep MLPs of [`grid`].

pub mod cache;
pub mod client;
pub mod grid;
pub mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Language, TweetRecord};
use crate::preprocess::TweetParts;

pub use cache::{CachedScorer, ScoreCache};
pub use client::{Clock, ClientConfig, ManualClock, PerspectiveClient, RateLimiter, SystemClock};
pub use grid::{grid_search, Arm, GridConfig, GridPoint, GridResult, GridSpace};
pub use mock::{MockConfig, MockServer};

/// Attributes in alphabetical order of their API names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Attribute {
    IdentityAttack,
    Insult,
    Obscene,
    Profanity,
    SevereToxicity,
    SexuallyExplicit,
    Threat,
    Toxicity,
    ToxicityFast,
}

impl Attribute {
    pub const ALL: [Attribute; 9] = [
        Attribute::IdentityAttack,
        Attribute::Insult,
        Attribute::Obscene,
        Attribute::Profanity,
        Attribute::SevereToxicity,
        Attribute::SexuallyExplicit,
        Attribute::Threat,
        Attribute::Toxicity,
        Attribute::ToxicityFast,
    ];

    /// Attributes offered for both English and German.
    pub const COMMON: [Attribute; 6] = [
        Attribute::IdentityAttack,
        Attribute::Insult,
        Attribute::Profanity,
        Attribute::SevereToxicity,
        Attribute::Threat,
        Attribute::Toxicity,
    ];

    pub fn api_name(self) -> &'static str {
        match self {
            Attribute::IdentityAttack => "IDENTITY_ATTACK",
            Attribute::Insult => "INSULT",
            Attribute::Obscene => "OBSCENE",
            Attribute::Profanity => "PROFANITY",
            Attribute::SevereToxicity => "SEVERE_TOXICITY",
            Attribute::SexuallyExplicit => "SEXUALLY_EXPLICIT",
            Attribute::Threat => "THREAT",
            Attribute::Toxicity => "TOXICITY",
            Attribute::ToxicityFast => "TOXICITY_FAST",
        }
    }

    pub fn is_common(self) -> bool {
        Attribute::COMMON.contains(&self)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.api_name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.api_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown attribute `{s}`")))
    }
}

/// The attribute set scored for `language`.
pub fn language_attributes(language: Language) -> Result<Vec<Attribute>> {
    match language {
        Language::En => Ok(Attribute::ALL.to_vec()),
        Language::De => Ok(Attribute::COMMON.to_vec()),
        Language::Hi => Err(Error::UnsupportedLanguage(language.as_str().into())),
    }
}

/// Summary scores in `[0, 1]` per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveScores(pub BTreeMap<Attribute, f64>);

impl PerspectiveScores {
    pub fn new(scores: BTreeMap<Attribute, f64>) -> Result<Self> {
        if let Some((a, v)) = scores.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("score {v} for {a} is outside [0,1]")));
        }
        Ok(PerspectiveScores(scores))
    }

    pub fn get(&self, attribute: Attribute) -> Result<f64> {
        self.0
            .get(&attribute)
            .copied()
            .ok_or_else(|| Error::MissingAttribute(attribute.api_name().into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Cleaned,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Cleaned => "cleaned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorMode {
    En,
    De,
    /// Only the attributes common to English and German.
    Shared,
}

impl FromStr for VectorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(VectorMode::En),
            "de" => Ok(VectorMode::De),
            "shared" => Ok(VectorMode::Shared),
            "hi" => Err(Error::UnsupportedLanguage("hi".into())),
            other => Err(Error::Config(format!("unknown vector mode `{other}`"))),
        }
    }
}

impl VectorMode {
    pub fn for_language(language: Language) -> Result<Self> {
        match language {
            Language::En => Ok(VectorMode::En),
            Language::De => Ok(VectorMode::De),
            Language::Hi => Err(Error::UnsupportedLanguage("hi".into())),
        }
    }

    fn attributes(self) -> Vec<Attribute> {
        match self {
            VectorMode::En => Attribute::ALL.to_vec(),
            VectorMode::De | VectorMode::Shared => Attribute::COMMON.to_vec(),
        }
    }

    /// `(variant, attribute)` coordinates: all full-tweet attributes, then all
    /// cleaned-text attributes, each block alphabetical.
    pub fn layout(self) -> Vec<(Variant, Attribute)> {
        let attrs = self.attributes();
        [Variant::Full, Variant::Cleaned]
            .into_iter()
            .flat_map(|v| attrs.iter().map(move |&a| (v, a)))
            .collect()
    }
}

pub fn layout_names(layout: &[(Variant, Attribute)]) -> Vec<String> {
    layout.iter().map(|(v, a)| format!("{}:{}", v.as_str(), a.api_name())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveVector {
    pub values: Vec<f64>,
    pub layout: Vec<(Variant, Attribute)>,
}

/// Anything that can score a text for every attribute of its language.
pub trait Scorer {
    fn score(&self, text: &str, language: Language, variant: Variant) -> Result<PerspectiveScores>;
}

/// Scores the raw tweet and its cleaned text and lays the results out for
/// `mode`. English records are allowed in every mode; German records only in
/// `De` and `Shared`.
pub fn build_vector(
    scorer: &dyn Scorer,
    record: &TweetRecord,
    parts: &TweetParts,
    mode: VectorMode,
) -> Result<PerspectiveVector> {
    language_attributes(record.language)?;
    if mode == VectorMode::En && record.language != Language::En {
        return Err(Error::Config(format!(
            "record {} is {} and has no English-only attributes",
            record.id, record.language
        )));
    }
    let full = scorer.score(&record.text, record.language, Variant::Full)?;
    let cleaned = scorer.score(&parts.cleaned_text, record.language, Variant::Cleaned)?;
    let layout = mode.layout();
    let values = layout
        .iter()
        .map(|&(v, a)| match v {
            Variant::Full => full.get(a),
            Variant::Cleaned => cleaned.get(a),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerspectiveVector { values, layout })
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub layout: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on raw rows; `layout` names the columns.
    pub fn fit_rows(rows: &[Vec<f64>], layout: Vec<String>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Data("cannot fit a standardizer on zero vectors".into()));
        }
        let d = layout.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("rows must all have {d} features")));
        }
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
        let std = (0..d)
            .map(|k| (rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n as f64).sqrt())
            .collect();
        Ok(Standardizer { layout, mean, std })
    }

    pub fn fit(vectors: &[PerspectiveVector]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::Data("cannot fit a standardizer on zero vectors".into()))?;
        if vectors.iter().any(|v| v.layout != first.layout) {
            return Err(Error::Dimension("vectors have different layouts".into()));
        }
        let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
        Standardizer::fit_rows(&rows, layout_names(&first.layout))
    }

    /// `(x - mean) / std`; zero-variance features become 0.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "vector has {} features, standardizer {}",
                row.len(),
                self.mean.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect())
    }

    pub fn transform(&self, vector: &PerspectiveVector) -> Result<Vec<f64>> {
        if layout_names(&vector.layout) != self.layout {
            return Err(Error::Dimension("vector layout differs from the fitted layout".into()));
        }
        self.transform_row(&vector.values)
    }
}
