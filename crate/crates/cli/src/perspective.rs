use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::json;

use hatedetect_core::classify::checkpoint;
use hatedetect_core::ingest::SplitTag;
use hatedetect_core::perspective::grid::{default_depth, ranking_csv, train_point};
use hatedetect_core::perspective::{
    build_vector, grid_search, language_attributes, layout_names, CachedScorer, ClientConfig, GridConfig, GridPoint,
    GridSpace, MockConfig, MockServer, PerspectiveClient, ScoreCache, VectorMode,
};
use hatedetect_core::preprocess::Preprocessor;
use hatedetect_core::train::{Dataset, TrainConfig};
use hatedetect_core::{Error, LabelSchema, Result, Task, TweetRecord};

use crate::commands::{create, load, write_error};
use crate::manifest::{beside, RunManifest};
use crate::{ExtractArgs, GridArgs, PerspectiveTrainArgs, VectorInputs};

const LABEL_COLUMNS: [&str; 2] = ["task_1", "task_2"];

pub fn extract(args: &ExtractArgs) -> Result<()> {
    let lang = args.corpus.lang;
    language_attributes(lang)?;
    let mode = match args.mode {
        Some(m) => m,
        None => VectorMode::for_language(lang)?,
    };
    let corpus = load(&args.corpus, SplitTag::Test)?;

    // Held for the whole run; dropping it stops the server.
    let mut mock = None;
    let (mut config, source) = if args.live {
        (ClientConfig::live()?, "live".to_string())
    } else if let Some(url) = &args.endpoint {
        (ClientConfig::new(url.as_str()), url.clone())
    } else {
        let server = MockServer::start(MockConfig::synthetic())?;
        let url = server.base_url();
        mock = Some(server);
        let mut c = ClientConfig::new(url);
        c.rate_limit = 0.0;
        (c, "mock".to_string())
    };
    if mock.is_none() || args.rate_limit.is_some() {
        config.rate_limit = args.rate_limit.unwrap_or(1.0);
    }
    config.in_flight = args.in_flight.max(1);
    let in_flight = config.in_flight;

    let mut manifest = RunManifest::start(
        "perspective extract",
        None,
        json!({ "lang": lang, "mode": mode, "source": source, "rate_limit": config.rate_limit, "in_flight": in_flight }),
    );
    manifest.input(&args.corpus.input)?;
    let cache = args.cache_path.as_deref().map(ScoreCache::open).transpose()?;
    let scorer = CachedScorer::new(PerspectiveClient::new(config), cache);
    let pre = Preprocessor::default();

    let records = corpus.records();
    let chunk = records.len().div_ceil(in_flight).max(1);
    let vectors: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|part| {
                let (scorer, pre) = (&scorer, &pre);
                s.spawn(move || {
                    part.iter()
                        .map(|r| Ok(build_vector(scorer, r, &pre.decompose(&r.text, r.language), mode)?.values))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect()
    });
    let mut rows = Vec::with_capacity(records.len());
    for part in vectors {
        rows.extend(part?);
    }

    let mut out = create(&args.out)?;
    let mut header: Vec<String> = std::iter::once("tweet_id".to_string())
        .chain(LABEL_COLUMNS.iter().map(|c| c.to_string()))
        .collect();
    header.extend(layout_names(&mode.layout()));
    let mut lines = vec![header.join("\t")];
    for (record, values) in records.iter().zip(&rows) {
        lines.push(vector_line(record, values));
    }
    for line in lines {
        writeln!(out, "{line}").map_err(|e| write_error(&args.out, e))?;
    }
    out.flush().map_err(|e| write_error(&args.out, e))?;
    drop(out);
    drop(mock);
    if let Some(cache) = scorer.cache() {
        log::info!("score cache {} holds {} entries", cache.path().display(), cache.len());
    }
    manifest.artifact(&args.out)?;
    manifest.write(&beside(&args.out))
}

fn vector_line(record: &TweetRecord, values: &[f64]) -> String {
    let mut fields = vec![
        record.id.clone(),
        record.task1.map_or(String::new(), |l| l.as_str().to_string()),
        record.task2.map_or(String::new(), |l| l.as_str().to_string()),
    ];
    fields.extend(values.iter().map(|v| v.to_string()));
    fields.join("\t")
}

/// Feature rows and gold labels read from extracted vector files.
struct VectorTable {
    layout: Vec<String>,
    data: Dataset,
}

fn read_vectors(inputs: &VectorInputs) -> Result<VectorTable> {
    let schema = LabelSchema::for_task(inputs.task);
    let label_col = match inputs.task {
        Task::Task1 => 1,
        Task::Task2 => 2,
    };
    let mut layout: Option<Vec<String>> = None;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for path in &inputs.vectors {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty vector file"))?
            .split('\t')
            .collect();
        if header.len() < 4 || header[0] != "tweet_id" || header[1..3] != LABEL_COLUMNS {
            return Err(Error::parse(path, 1, "not a vector file"));
        }
        let names: Vec<String> = header[3..].iter().map(|s| s.to_string()).collect();
        match &layout {
            Some(l) if *l != names => {
                return Err(Error::Dimension(format!("{} has a different vector layout", path.display())))
            }
            Some(_) => {}
            None => layout = Some(names.clone()),
        }
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != header.len() {
                return Err(Error::parse(path, n + 2, format!("expected {} fields", header.len())));
            }
            let label = fields[label_col];
            if label.is_empty() {
                return Err(Error::parse(path, n + 2, format!("no {} label", inputs.task)));
            }
            y.push(schema.index_of(label)?);
            x.push(
                fields[3..]
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| Error::parse(path, n + 2, format!("bad number `{v}`"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
    }
    Ok(VectorTable {
        layout: layout.unwrap_or_default(),
        data: Dataset::new(x, y)?,
    })
}

fn grid_config(inputs: &VectorInputs, seed: Option<u64>) -> GridConfig {
    let base = GridConfig::default();
    GridConfig {
        seed: seed.unwrap_or(base.seed),
        patience: inputs.patience,
        train: TrainConfig {
            max_epochs: inputs.epochs.unwrap_or(base.train.max_epochs),
            ..base.train
        },
        ..base
    }
}

fn record_inputs(manifest: &mut RunManifest, paths: &[impl AsRef<Path>]) -> Result<()> {
    paths.iter().try_for_each(|p| manifest.input(p.as_ref()))
}

pub fn train(args: &PerspectiveTrainArgs, seed: Option<u64>) -> Result<()> {
    let inputs = &args.inputs;
    let table = read_vectors(inputs)?;
    let config = grid_config(inputs, seed);
    let point = GridPoint {
        activation: args.activation,
        arm: args.arm,
        width: args.width,
        depth: inputs.depth.unwrap_or_else(|| default_depth(inputs.task)),
    };
    let mut manifest = RunManifest::start(
        "perspective train",
        Some(config.seed),
        json!({ "task": inputs.task, "point": point, "grid": config }),
    );
    record_inputs(&mut manifest, &inputs.vectors)?;
    let trained = train_point(&table.data, inputs.task, &point, &config, config.seed)?;
    let meta = json!({
        "task": inputs.task,
        "classes": LabelSchema::for_task(inputs.task).classes,
        "layout": table.layout,
        "point": point,
        "standardizer": trained.standardizer,
        "best_val_f1": trained.state.best_val_f1,
    });
    for path in checkpoint::save(&trained.network, &args.out_dir, meta)? {
        manifest.artifact(&path)?;
    }
    let history = args.out_dir.join("history.csv");
    trained.state.write_history(&history)?;
    manifest.artifact(&history)?;
    println!("{}\tbest inner-val macro-F1 {:.2}", point.key(), trained.state.best_val_f1 * 100.0);
    manifest.write(&args.out_dir.join("manifest.json"))
}

pub fn grid(args: &GridArgs, seed: Option<u64>) -> Result<()> {
    let inputs = &args.inputs;
    let table = read_vectors(inputs)?;
    let config = GridConfig {
        folds: args.folds,
        ..grid_config(inputs, seed)
    };
    let mut space = GridSpace::for_task(inputs.task);
    if let Some(a) = &args.activations {
        space.activations = a.clone();
    }
    if let Some(a) = &args.arms {
        space.arms = a.clone();
    }
    if let Some(w) = &args.widths {
        space.widths = w.clone();
    }
    if let Some(d) = inputs.depth {
        space.depth = d;
    }
    let mut manifest = RunManifest::start(
        "perspective grid",
        Some(config.seed),
        json!({ "task": inputs.task, "space": space, "grid": config }),
    );
    record_inputs(&mut manifest, &inputs.vectors)?;
    let results = grid_search(&table.data, inputs.task, &space, &config)?;
    let mut out = create(&args.out)?;
    out.write_all(ranking_csv(&results).as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| write_error(&args.out, e))?;
    drop(out);
    if let Some(best) = results.first() {
        println!("{}\tmean macro-F1 {:.2}", best.point.key(), best.mean_f1 * 100.0);
    }
    manifest.artifact(&args.out)?;
    manifest.write(&beside(&args.out))
}
