//! End-to-end wiring: tweets to fused feature vectors, training under the
//! mono- or multilingual regime, checkpointing and prediction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::checkpoint;
use crate::classify::{Activation, EncoderProjection, MlpConfig, Network, Tensor};
use crate::encode::{
    average_embeddings, embed_emojis, fuse, load_emoji_lexicon, Channel, ChannelSet, EmojiLexicon, HashingEncoder,
    PrecomputedEncoder, Projection, TextEncoder,
};
use crate::error::{Error, Result};
use crate::eval::macro_f1;
use crate::ingest::{
    aggregate_multilingual, stratified_split, Corpus, LabelSchema, Language, Task, TweetRecord, DEFAULT_SPLIT_SEED,
    DEFAULT_VAL_FRACTION,
};
use crate::preprocess::segment::build_lexicon;
use crate::preprocess::{Preprocessor, TweetParts};
use crate::synthetic;
use crate::train::{plan_regime, predict_all, train_adaptive, Dataset, EncoderMode, HistoryEntry, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    /// Hashed bag of words, optionally followed by a dense projection.
    Hashing {
        buckets: usize,
        projection_dim: Option<usize>,
    },
    /// Sentence vectors exported from an external encoder.
    Precomputed { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmojiSource {
    File { path: PathBuf },
    Synthetic { dim: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LexiconSource {
    File { path: PathBuf },
    Synthetic,
}

/// Everything needed to rebuild the feature extractor of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub encoder: EncoderSpec,
    pub channels: ChannelSet,
    pub encoder_mode: EncoderMode,
    pub emoji: Option<EmojiSource>,
    #[serde(default)]
    pub lexicons: BTreeMap<Language, LexiconSource>,
    pub activation: Activation,
    /// Seed of the projection initialisation.
    pub projection_seed: u64,
}

impl FeatureSpec {
    pub fn hashing(buckets: usize, channels: ChannelSet) -> Self {
        FeatureSpec {
            encoder: EncoderSpec::Hashing {
                buckets,
                projection_dim: None,
            },
            channels,
            encoder_mode: EncoderMode::Frozen,
            emoji: None,
            lexicons: BTreeMap::new(),
            activation: Activation::Tanh,
            projection_seed: 0,
        }
    }
}

pub struct Featurizer {
    spec: FeatureSpec,
    preprocessor: Preprocessor,
    encoder: Box<dyn TextEncoder>,
    /// Present in fine-tuning mode: produces the raw buckets fed to the
    /// trainable projection.
    hashing: Option<HashingEncoder>,
    emoji: EmojiLexicon,
}

impl Featurizer {
    pub fn new(spec: FeatureSpec) -> Result<Self> {
        let emoji = match &spec.emoji {
            Some(EmojiSource::File { path }) => load_emoji_lexicon(path)?,
            Some(EmojiSource::Synthetic { dim, seed }) => synthetic::emoji_lexicon(*dim, *seed),
            None if spec.channels.contains(Channel::Emoji) => {
                return Err(Error::Config("the emoji channel needs an emoji lexicon".into()))
            }
            None => EmojiLexicon::new(0),
        };
        let mut preprocessor = Preprocessor::default();
        for (&lang, source) in &spec.lexicons {
            let lexicon = match source {
                LexiconSource::File { path } => build_lexicon(path)?,
                LexiconSource::Synthetic => synthetic::segmenter_lexicon(),
            };
            preprocessor = preprocessor.with_lexicon(lang, lexicon);
        }
        let (encoder, hashing): (Box<dyn TextEncoder>, Option<HashingEncoder>) = match (&spec.encoder, spec.encoder_mode) {
            (EncoderSpec::Hashing { buckets, projection_dim }, EncoderMode::Frozen) => {
                if *buckets == 0 {
                    return Err(Error::Config("hashing encoder needs at least one bucket".into()));
                }
                let enc = match projection_dim {
                    Some(d) => HashingEncoder::with_projection(*buckets, *d, spec.projection_seed, false),
                    None => HashingEncoder::new(*buckets),
                };
                (Box::new(enc), None)
            }
            (EncoderSpec::Hashing { buckets, projection_dim }, EncoderMode::Finetune) => {
                let Some(d) = projection_dim else {
                    return Err(Error::Config("fine-tuning the hashing encoder needs a projection_dim".into()));
                };
                if *buckets == 0 || *d == 0 {
                    return Err(Error::Config("hashing encoder dimensions must be positive".into()));
                }
                let enc = HashingEncoder::with_projection(*buckets, *d, spec.projection_seed, true);
                (Box::new(enc), Some(HashingEncoder::new(*buckets)))
            }
            (EncoderSpec::Precomputed { path }, EncoderMode::Frozen) => (Box::new(PrecomputedEncoder::load(path)?), None),
            (EncoderSpec::Precomputed { .. }, EncoderMode::Finetune) => {
                return Err(Error::Config(
                    "precomputed sentence vectors are fixed and cannot be fine-tuned".into(),
                ))
            }
        };
        Ok(Featurizer {
            spec,
            preprocessor,
            encoder,
            hashing,
            emoji,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    /// Length of the fused vector seen by the classifier head.
    pub fn fused_dim(&self) -> usize {
        self.spec
            .channels
            .iter()
            .map(|c| match c {
                Channel::Text | Channel::Hashtag => self.encoder.dim(),
                Channel::Emoji => self.emoji.dim(),
            })
            .sum()
    }

    /// Length of the vectors returned by [`Featurizer::features`].
    pub fn raw_dim(&self) -> usize {
        match &self.hashing {
            None => self.fused_dim(),
            Some(h) => {
                let projected = 1 + usize::from(self.spec.channels.contains(Channel::Hashtag));
                h.buckets() * projected + self.emoji_width()
            }
        }
    }

    fn emoji_width(&self) -> usize {
        if self.spec.channels.contains(Channel::Emoji) {
            self.emoji.dim()
        } else {
            0
        }
    }

    pub fn decompose(&self, record: &TweetRecord) -> TweetParts {
        self.preprocessor.decompose(&record.text, record.language)
    }

    /// Input vector for the network: the fused embedding, or in fine-tuning
    /// mode the unprojected text and hashtag buckets followed by the emoji
    /// embedding.
    pub fn features(&self, record: &TweetRecord) -> Result<Vec<f64>> {
        let parts = self.decompose(record);
        match &self.hashing {
            None => Ok(fuse(&parts, self.encoder.as_ref(), &self.emoji, &self.spec.channels)?.vector),
            Some(h) => {
                let mut raw = h.hashed(&parts.cleaned_text);
                if self.spec.channels.contains(Channel::Hashtag) {
                    let tags: Vec<Vec<f64>> = parts.segmented_hashtags.iter().map(|w| h.hashed(&w.join(" "))).collect();
                    raw.extend(average_embeddings(&tags, h.buckets())?);
                }
                if self.spec.channels.contains(Channel::Emoji) {
                    raw.extend(embed_emojis(&parts.emojis, &self.emoji));
                }
                Ok(raw)
            }
        }
    }

    pub fn dataset(&self, corpus: &Corpus, task: Task) -> Result<Dataset> {
        let x = corpus.records().iter().map(|r| self.features(r)).collect::<Result<Vec<_>>>()?;
        Dataset::new(x, corpus.labels(task)?)
    }

    /// Unlabelled feature rows.
    pub fn rows(&self, records: &[TweetRecord]) -> Result<Vec<Vec<f64>>> {
        records.iter().map(|r| self.features(r)).collect()
    }

    /// A fresh two-layer head, preceded by the trainable projection in
    /// fine-tuning mode.
    pub fn build_network(&self, num_classes: usize, dropout_p: f64, seed: u64) -> Result<Network> {
        let head = MlpConfig::two_layer_head(self.fused_dim(), num_classes, self.spec.activation, dropout_p);
        match &self.hashing {
            None => Network::head(head, seed),
            Some(h) => {
                let EncoderSpec::Hashing {
                    projection_dim: Some(d),
                    ..
                } = self.spec.encoder
                else {
                    unreachable!("fine-tuning is only built for projected hashing encoders")
                };
                let p = Projection::init(h.buckets(), d, self.spec.projection_seed, true);
                let projection = EncoderProjection {
                    weight: Tensor::from_vec("encoder.projection", d, h.buckets(), p.weights),
                    project_hashtag: self.spec.channels.contains(Channel::Hashtag),
                    passthrough: self.emoji_width(),
                };
                Network::with_projection(projection, head, seed)
            }
        }
    }
}

/// A trained network with the metadata needed to reuse it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub spec: FeatureSpec,
    pub task: Task,
    pub languages: Vec<Language>,
    pub best_val_f1: f64,
    pub history: Vec<HistoryEntry>,
    pub config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    task: Task,
    classes: Vec<String>,
    languages: Vec<Language>,
    features: FeatureSpec,
    best_val_f1: f64,
    train: TrainConfig,
}

impl TrainedModel {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let meta = ModelMeta {
            task: self.task,
            classes: LabelSchema::for_task(self.task).classes,
            languages: self.languages.clone(),
            features: self.spec.clone(),
            best_val_f1: self.best_val_f1,
            train: self.config.clone(),
        };
        checkpoint::save(&self.network, dir, serde_json::to_value(meta)?)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let (network, meta) = checkpoint::load(dir)?;
        let meta: ModelMeta = serde_json::from_value(meta)?;
        if meta.classes != LabelSchema::for_task(meta.task).classes {
            return Err(Error::Data("checkpoint label schema does not match its task".into()));
        }
        Ok(TrainedModel {
            network,
            spec: meta.features,
            task: meta.task,
            languages: meta.languages,
            best_val_f1: meta.best_val_f1,
            history: Vec::new(),
            config: meta.train,
        })
    }

    pub fn schema(&self) -> LabelSchema {
        LabelSchema::for_task(self.task)
    }
}

/// Adaptive-schedule training of a fresh head on `train`, validated on `val`.
pub fn train_model(
    featurizer: &Featurizer,
    train: &Corpus,
    val: &Corpus,
    task: Task,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let schema = LabelSchema::for_task(task);
    let train_set = featurizer.dataset(train, task)?;
    let val_set = featurizer.dataset(val, task)?;
    let network = featurizer.build_network(schema.len(), config.dropout_p, config.seed)?;
    let (network, state) = train_adaptive(network, &train_set, &val_set, schema, config)?;
    let mut languages: Vec<Language> = train.records().iter().map(|r| r.language).collect();
    languages.sort();
    languages.dedup();
    Ok(TrainedModel {
        network,
        spec: featurizer.spec().clone(),
        task,
        languages,
        best_val_f1: state.best_val_f1,
        history: state.history,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub label: String,
    pub probabilities: Vec<f64>,
}

pub fn predict(model: &TrainedModel, featurizer: &Featurizer, records: &[TweetRecord]) -> Result<Vec<Prediction>> {
    let schema = model.schema();
    records
        .iter()
        .map(|r| {
            let (label, probabilities) = model.network.predict(&featurizer.features(r)?)?;
            Ok(Prediction {
                id: r.id.clone(),
                label: schema.name(label).to_string(),
                probabilities,
            })
        })
        .collect()
}

/// Macro-F1 of `model` on a labelled corpus.
pub fn evaluate(model: &TrainedModel, featurizer: &Featurizer, corpus: &Corpus) -> Result<f64> {
    let data = featurizer.dataset(corpus, model.task)?;
    macro_f1(&data.y, &predict_all(&model.network, &data)?, &model.schema())
}

/// Models of one regime run and which model serves each language.
#[derive(Debug, Clone)]
pub struct RegimeRun {
    pub models: Vec<TrainedModel>,
    pub assignment: BTreeMap<Language, usize>,
    /// Validation macro-F1 per language.
    pub val_f1: BTreeMap<Language, f64>,
}

/// Trains one model per language (mono) or one model on the aggregated
/// languages (multi) for `task`, then scores each language's validation
/// split with the model that serves it. Each corpus is split with
/// [`DEFAULT_VAL_FRACTION`]. Independent mono jobs run in parallel.
pub fn run_regime(
    task: Task,
    languages: &[Language],
    corpora: &BTreeMap<Language, Corpus>,
    featurizer: &Featurizer,
    config: &TrainConfig,
) -> Result<RegimeRun> {
    config.validate()?;
    let mut splits = BTreeMap::new();
    for &lang in languages {
        let corpus = corpora
            .get(&lang)
            .ok_or_else(|| Error::Data(format!("no corpus for language {lang}")))?;
        splits.insert(lang, stratified_split(corpus, task, DEFAULT_VAL_FRACTION, DEFAULT_SPLIT_SEED)?);
    }
    let jobs = plan_regime(config.regime, task, languages, config.seed)?;
    let results: Vec<Result<TrainedModel>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|job| {
                let splits = &splits;
                s.spawn(move || {
                    let pick = |val: bool| -> Result<Corpus> {
                        let parts: Vec<Corpus> = job
                            .languages
                            .iter()
                            .map(|l| if val { splits[l].1.clone() } else { splits[l].0.clone() })
                            .collect();
                        if parts.len() == 1 {
                            Ok(parts.into_iter().next().unwrap())
                        } else {
                            aggregate_multilingual(&parts)
                        }
                    };
                    let cfg = TrainConfig {
                        seed: job.seed,
                        ..config.clone()
                    };
                    train_model(featurizer, &pick(false)?, &pick(true)?, task, &cfg)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let models = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut assignment = BTreeMap::new();
    let mut val_f1 = BTreeMap::new();
    for (i, job) in jobs.iter().enumerate() {
        for &lang in &job.languages {
            assignment.insert(lang, i);
            val_f1.insert(lang, evaluate(&models[i], featurizer, &splits[&lang].1)?);
        }
    }
    Ok(RegimeRun {
        models,
        assignment,
        val_f1,
    })
}
