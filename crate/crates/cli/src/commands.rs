use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use hatedetect_core::eval::{format_score, Metrics};
use hatedetect_core::ingest::{load_corpus_with, SplitTag};
use hatedetect_core::pipeline::{
    predict as predict_records, run_regime, EmojiSource, EncoderSpec, FeatureSpec, Featurizer, LexiconSource, TrainedModel,
};
use hatedetect_core::preprocess::segment::build_lexicon;
use hatedetect_core::preprocess::Preprocessor;
use hatedetect_core::train::{predict_all, TrainConfig};
use hatedetect_core::{Corpus, Error, Language, Result};

use crate::manifest::{beside, RunManifest};
use crate::{CorpusArgs, EvaluateArgs, PredictArgs, PreprocessArgs, TrainArgs};

pub fn write_error(path: &Path, e: std::io::Error) -> Error {
    Error::io(path, e)
}

pub fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| write_error(parent, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| write_error(path, e))
}

pub fn load(args: &CorpusArgs, split: SplitTag) -> Result<Corpus> {
    let columns = args.columns.clone().unwrap_or_default();
    load_corpus_with(&args.input, args.lang, split, &columns)
}

pub fn preprocess(args: &PreprocessArgs) -> Result<()> {
    let mut manifest = RunManifest::start("preprocess", None, json!({ "lang": args.corpus.lang }));
    let corpus = load(&args.corpus, SplitTag::Test)?;
    manifest.input(&args.corpus.input)?;
    let mut pre = Preprocessor::default();
    if let Some(path) = &args.lexicon {
        pre = pre.with_lexicon(args.corpus.lang, build_lexicon(path)?);
        manifest.input(path)?;
    }
    let mut out = create(&args.out)?;
    for record in corpus.records() {
        let parts = pre.decompose(&record.text, record.language);
        let mut line = serde_json::to_value(&parts)?;
        line["tweet_id"] = json!(record.id);
        writeln!(out, "{line}").map_err(|e| write_error(&args.out, e))?;
    }
    out.flush().map_err(|e| write_error(&args.out, e))?;
    drop(out);
    log::info!("decomposed {} tweets into {}", corpus.len(), args.out.display());
    manifest.artifact(&args.out)?;
    manifest.write(&beside(&args.out))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| Error::io(path, e))
}

/// Parses `hashing[:BUCKETS[:PROJECTION_DIM]]` or `precomputed:PATH`.
fn parse_encoder(s: &str) -> Result<EncoderSpec> {
    let bad = || Error::Config(format!("bad encoder `{s}`; expected hashing[:BUCKETS[:DIM]] or precomputed:PATH"));
    let mut parts = s.splitn(2, ':');
    match parts.next() {
        Some("hashing") => {
            let mut dims = parts.next().unwrap_or("1024").split(':');
            let buckets = dims.next().unwrap_or("1024").parse().map_err(|_| bad())?;
            let projection_dim = dims.next().map(|d| d.parse().map_err(|_| bad())).transpose()?;
            if dims.next().is_some() {
                return Err(bad());
            }
            Ok(EncoderSpec::Hashing { buckets, projection_dim })
        }
        Some("precomputed") => Ok(EncoderSpec::Precomputed {
            path: absolute(Path::new(parts.next().ok_or_else(bad)?))?,
        }),
        _ => Err(bad()),
    }
}

fn train_config(args: &TrainArgs, seed: Option<u64>) -> Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(regime) = args.regime {
        config.regime = regime;
    }
    if let Some(mode) = args.encoder_mode {
        config.encoder_mode = mode;
    }
    if let Some(channels) = &args.channels {
        config.channels = channels.clone();
    }
    if let Some(lr) = args.lr {
        config.initial_lr = lr;
    }
    if let Some(epochs) = args.epochs {
        config.max_epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(p) = args.dropout {
        config.dropout_p = p;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn train(args: &TrainArgs, seed: Option<u64>) -> Result<()> {
    let config = train_config(args, seed)?;
    let spec = FeatureSpec {
        encoder: parse_encoder(&args.encoder)?,
        channels: config.channels.clone(),
        encoder_mode: config.encoder_mode,
        emoji: args
            .emoji
            .as_deref()
            .map(|p| absolute(p).map(|path| EmojiSource::File { path }))
            .transpose()?,
        lexicons: args
            .lexicons
            .iter()
            .map(|lp| Ok((lp.language, LexiconSource::File { path: absolute(&lp.path)? })))
            .collect::<Result<_>>()?,
        activation: args.activation,
        projection_seed: config.seed,
    };
    let featurizer = Featurizer::new(spec.clone())?;

    let mut manifest = RunManifest::start(
        "train",
        Some(config.seed),
        json!({ "task": args.task, "train": config, "features": spec }),
    );
    let columns = args.columns.clone().unwrap_or_default();
    let mut corpora = BTreeMap::new();
    for lp in &args.data {
        if corpora.contains_key(&lp.language) {
            return Err(Error::Config(format!("--data given twice for {}", lp.language)));
        }
        corpora.insert(lp.language, load_corpus_with(&lp.path, lp.language, SplitTag::Train, &columns)?);
        manifest.input(&lp.path)?;
    }
    for path in args.emoji.iter().chain(args.lexicons.iter().map(|lp| &lp.path)) {
        manifest.input(path)?;
    }
    let languages: Vec<Language> = corpora.keys().copied().collect();

    let run = run_regime(args.task, &languages, &corpora, &featurizer, &config)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| write_error(&args.out_dir, e))?;
    for model in &run.models {
        let langs: Vec<&str> = model.languages.iter().map(|l| l.as_str()).collect();
        let dir = args.out_dir.join(format!("{}-{}", args.task, langs.join("+")));
        for path in model.save(&dir)? {
            manifest.artifact(&path)?;
        }
        let history = dir.join("history.csv");
        let mut csv = String::from("epoch,lr,val_f1,accepted\n");
        for h in &model.history {
            csv.push_str(&format!("{},{:e},{},{}\n", h.epoch, h.lr, h.val_f1, h.accepted));
        }
        fs::write(&history, csv).map_err(|e| write_error(&history, e))?;
        manifest.artifact(&history)?;
        println!("{}\t{}\tbest val macro-F1 {}", dir.display(), langs.join("+"), format_score(model.best_val_f1));
    }
    for (lang, f1) in &run.val_f1 {
        log::info!("{lang}: validation macro-F1 {}", format_score(*f1));
    }
    manifest.write(&args.out_dir.join("manifest.json"))
}

fn open_model(dir: &Path, lang: Language) -> Result<(TrainedModel, Featurizer)> {
    let model = TrainedModel::load(dir)?;
    if !model.languages.contains(&lang) {
        log::warn!(
            "model was trained on {:?}; applying it to {lang}",
            model.languages.iter().map(|l| l.as_str()).collect::<Vec<_>>()
        );
    }
    let featurizer = Featurizer::new(model.spec.clone())?;
    Ok((model, featurizer))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (model, featurizer) = open_model(&args.model, args.corpus.lang)?;
    if model.task != args.task {
        return Err(Error::Config(format!(
            "model was trained for {} but evaluation asks for {}",
            model.task, args.task
        )));
    }
    let mut manifest = RunManifest::start("evaluate", None, json!({ "task": args.task, "lang": args.corpus.lang }));
    let corpus = load(&args.corpus, SplitTag::Test)?;
    manifest.input(&args.corpus.input)?;
    let data = featurizer.dataset(&corpus, args.task)?;
    let pred = predict_all(&model.network, &data)?;
    let metrics = Metrics::compute(&data.y, &pred, args.task)?;
    metrics.write(&args.out)?;
    manifest.artifact(&args.out)?;
    manifest.write(&beside(&args.out))?;
    println!("macro-F1\t{}", format_score(metrics.macro_f1));
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (model, featurizer) = open_model(&args.model, args.corpus.lang)?;
    let mut manifest = RunManifest::start("predict", None, json!({ "task": model.task, "lang": args.corpus.lang }));
    let corpus = load(&args.corpus, SplitTag::Test)?;
    manifest.input(&args.corpus.input)?;
    let predictions = predict_records(&model, &featurizer, corpus.records())?;
    let mut out = create(&args.out)?;
    let schema = model.schema();
    let header = ["tweet_id", "predicted_label"]
        .into_iter()
        .chain(schema.classes.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join("\t");
    let w = |out: &mut BufWriter<fs::File>, line: String| writeln!(out, "{line}").map_err(|e| write_error(&args.out, e));
    w(&mut out, header)?;
    for p in &predictions {
        let probs: Vec<String> = p.probabilities.iter().map(|v| format!("{v:.6}")).collect();
        w(&mut out, format!("{}\t{}\t{}", p.id, p.label, probs.join("\t")))?;
    }
    out.flush().map_err(|e| write_error(&args.out, e))?;
    drop(out);
    manifest.artifact(&args.out)?;
    manifest.write(&beside(&args.out))
}
