//! Python bindings: corpora, preprocessing, training, prediction and metrics.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::{PyConnectionError, PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hatedetect_core::encode::ChannelSet;
use hatedetect_core::eval::macro_f1_named;
use hatedetect_core::ingest::{load_corpus, write_corpus};
use hatedetect_core::perspective::{layout_names, VectorMode};
use hatedetect_core::pipeline::{self, EmojiSource, EncoderSpec, FeatureSpec, Featurizer, TrainedModel};
use hatedetect_core::preprocess::segment::{segment_hashtag, SegmenterLexicon};
use hatedetect_core::preprocess::Preprocessor;
use hatedetect_core::train::{Regime, TrainConfig};
use hatedetect_core::{synthetic, Error, LabelSchema, Language, Task};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io { .. } => PyIOError::new_err(msg),
        _ if e.is_network() => PyConnectionError::new_err(msg),
        Error::Dimension(_) | Error::NonFinite(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn lexicon(counts: HashMap<String, u64>) -> SegmenterLexicon {
    SegmenterLexicon::from_counts(counts)
}

/// Splits a tweet into cleaned text and its entity channels.
#[pyfunction]
#[pyo3(signature = (text, lang, lexicon=None))]
fn decompose<'py>(
    py: Python<'py>,
    text: &str,
    lang: &str,
    lexicon: Option<HashMap<String, u64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let language: Language = parse(lang)?;
    let mut pre = Preprocessor::default();
    if let Some(counts) = lexicon {
        pre = pre.with_lexicon(language, self::lexicon(counts));
    }
    let parts = pre.decompose(text, language);
    let d = PyDict::new(py);
    d.set_item("cleaned_text", parts.cleaned_text)?;
    d.set_item("hashtags", parts.hashtags)?;
    d.set_item("segmented_hashtags", parts.segmented_hashtags)?;
    d.set_item("emojis", parts.emojis)?;
    d.set_item("smileys", parts.smileys)?;
    d.set_item("urls", parts.urls)?;
    d.set_item("mentions", parts.mentions)?;
    d.set_item("numbers", parts.numbers)?;
    d.set_item("reserved", parts.reserved)?;
    Ok(d)
}

/// Most probable word split of a hashtag under unigram counts.
#[pyfunction]
fn segment(tag: &str, lexicon: HashMap<String, u64>) -> Vec<String> {
    segment_hashtag(tag, &self::lexicon(lexicon))
}

/// Unweighted mean of per-class F1 over the task's classes.
#[pyfunction]
fn macro_f1(gold: Vec<String>, pred: Vec<String>, task: &str) -> PyResult<f64> {
    let task: Task = parse(task)?;
    macro_f1_named(&gold, &pred, &LabelSchema::for_task(task)).map_err(py_err)
}

/// Column names of a toxicity-score vector (`en`, `de` or `shared`).
#[pyfunction]
fn perspective_layout(mode: &str) -> PyResult<Vec<String>> {
    let mode: VectorMode = parse(mode)?;
    Ok(layout_names(&mode.layout()))
}

#[pyclass(module = "hatedetect", frozen, from_py_object)]
#[derive(Clone)]
struct Corpus {
    inner: hatedetect_core::Corpus,
}

#[pymethods]
impl Corpus {
    /// Reads a tweet TSV with `tweet_id`, `text`, `task_1` and `task_2` columns.
    #[staticmethod]
    fn load(path: PathBuf, lang: &str) -> PyResult<Self> {
        Ok(Corpus {
            inner: load_corpus(path, parse(lang)?).map_err(py_err)?,
        })
    }

    /// Seeded synthetic corpus with learnable labels.
    #[staticmethod]
    #[pyo3(signature = (n, lang, seed=0))]
    fn synthetic(n: usize, lang: &str, seed: u64) -> PyResult<Self> {
        Ok(Corpus {
            inner: synthetic::generate(n, parse(lang)?, seed).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_corpus(&self.inner, path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.records().iter().map(|r| r.id.clone()).collect()
    }

    fn texts(&self) -> Vec<String> {
        self.inner.records().iter().map(|r| r.text.clone()).collect()
    }

    /// Gold label names, `None` where a record is unlabelled.
    fn labels(&self, task: &str) -> PyResult<Vec<Option<String>>> {
        let task: Task = parse(task)?;
        Ok(self
            .inner
            .records()
            .iter()
            .map(|r| match task {
                Task::Task1 => r.task1.map(|l| l.as_str().to_string()),
                Task::Task2 => r.task2.map(|l| l.as_str().to_string()),
            })
            .collect())
    }

    fn label_counts(&self, task: &str) -> PyResult<BTreeMap<String, usize>> {
        let task: Task = parse(task)?;
        let schema = LabelSchema::for_task(task);
        Ok(schema.classes.iter().cloned().zip(self.inner.label_counts(task)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} tweets)", self.inner.len())
    }
}

#[pyclass(module = "hatedetect", frozen)]
struct Model {
    model: TrainedModel,
    featurizer: Featurizer,
}

impl Model {
    fn wrap(model: TrainedModel) -> PyResult<Self> {
        let featurizer = Featurizer::new(model.spec.clone()).map_err(py_err)?;
        Ok(Model { model, featurizer })
    }
}

#[pymethods]
impl Model {
    /// Opens a checkpoint directory written by `save` or the CLI.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Model::wrap(TrainedModel::load(path).map_err(py_err)?)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.model.save(path).map(|_| ()).map_err(py_err)
    }

    #[getter]
    fn task(&self) -> &'static str {
        self.model.task.as_str()
    }

    #[getter]
    fn languages(&self) -> Vec<&'static str> {
        self.model.languages.iter().map(|l| l.as_str()).collect()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.model.schema().classes
    }

    #[getter]
    fn best_val_f1(&self) -> f64 {
        self.model.best_val_f1
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.model.network.input_dim()
    }

    /// `(epoch, lr, val_f1, accepted)` per epoch; empty after `load`.
    #[getter]
    fn history(&self) -> Vec<(usize, f64, f64, bool)> {
        self.model
            .history
            .iter()
            .map(|h| (h.epoch, h.lr, h.val_f1, h.accepted))
            .collect()
    }

    /// `(tweet_id, label, probabilities)` for every tweet.
    fn predict(&self, py: Python<'_>, corpus: &Corpus) -> PyResult<Vec<(String, String, Vec<f64>)>> {
        let out = py
            .detach(|| pipeline::predict(&self.model, &self.featurizer, corpus.inner.records()))
            .map_err(py_err)?;
        Ok(out.into_iter().map(|p| (p.id, p.label, p.probabilities)).collect())
    }

    /// Macro-F1 on a labelled corpus.
    fn evaluate(&self, py: Python<'_>, corpus: &Corpus) -> PyResult<f64> {
        py.detach(|| pipeline::evaluate(&self.model, &self.featurizer, &corpus.inner))
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(task={}, languages={:?}, best_val_f1={:.4})",
            self.model.task,
            self.languages(),
            self.model.best_val_f1
        )
    }
}

/// Trains under the mono (one model per language) or multi (one shared
/// model) regime. Returns the models in training order.
#[pyfunction]
#[pyo3(signature = (
    task, corpora, regime="mono", buckets=1024, channels="text,hashtag", emoji_path=None,
    lr=2e-5, epochs=100, batch_size=32, dropout=0.2, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    task: &str,
    corpora: BTreeMap<String, Corpus>,
    regime: &str,
    buckets: usize,
    channels: &str,
    emoji_path: Option<PathBuf>,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    dropout: f64,
    seed: u64,
) -> PyResult<Vec<Model>> {
    let task: Task = parse(task)?;
    let channels: ChannelSet = parse(channels)?;
    let corpora: BTreeMap<Language, hatedetect_core::Corpus> = corpora
        .into_iter()
        .map(|(lang, c)| Ok((parse(&lang)?, c.inner)))
        .collect::<PyResult<_>>()?;
    let config = TrainConfig {
        initial_lr: lr,
        max_epochs: epochs,
        batch_size,
        dropout_p: dropout,
        seed,
        regime: parse::<Regime>(regime)?,
        channels: channels.clone(),
        ..TrainConfig::default()
    };
    let spec = FeatureSpec {
        encoder: EncoderSpec::Hashing {
            buckets,
            projection_dim: None,
        },
        emoji: emoji_path.map(|path| EmojiSource::File { path }),
        projection_seed: seed,
        ..FeatureSpec::hashing(buckets, channels)
    };
    let featurizer = Featurizer::new(spec).map_err(py_err)?;
    let languages: Vec<Language> = corpora.keys().copied().collect();
    let run = py
        .detach(|| pipeline::run_regime(task, &languages, &corpora, &featurizer, &config))
        .map_err(py_err)?;
    run.models.into_iter().map(Model::wrap).collect()
}

#[pymodule]
fn hatedetect(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Corpus>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(macro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(perspective_layout, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
