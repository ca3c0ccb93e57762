//! Exhaustive grid search over deep MLPs on toxicity-score features, scored
//! by stratified k-fold cross-validated macro-F1.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::classify::{Activation, MlpConfig, Network, OptimizerKind};
use crate::error::{Error, Result};
use crate::eval::macro_f1;
use crate::ingest::{LabelSchema, Task};
use crate::train::{predict_all, train_adaptive, train_earlystop, Dataset, TrainConfig, TrainState};

/// Optimizer paired with its learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "adam-earlystop")]
    AdamEarlyStop,
    #[serde(rename = "sgd-adaptive")]
    SgdAdaptive,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::AdamEarlyStop, Arm::SgdAdaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::AdamEarlyStop => "adam-earlystop",
            Arm::SgdAdaptive => "sgd-adaptive",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam-earlystop" | "adam" => Ok(Arm::AdamEarlyStop),
            "sgd-adaptive" | "sgd" => Ok(Arm::SgdAdaptive),
            other => Err(Error::Config(format!("unknown optimizer arm `{other}`"))),
        }
    }
}

/// Hidden depth for the binary task and the fine-grained task.
pub fn default_depth(task: Task) -> usize {
    match task {
        Task::Task1 => 12,
        Task::Task2 => 9,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub activations: Vec<Activation>,
    pub arms: Vec<Arm>,
    pub widths: Vec<usize>,
    pub depth: usize,
}

impl GridSpace {
    pub fn for_task(task: Task) -> Self {
        GridSpace {
            activations: Activation::ALL.to_vec(),
            arms: Arm::ALL.to_vec(),
            widths: vec![50, 100, 200],
            depth: default_depth(task),
        }
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &activation in &self.activations {
            for &arm in &self.arms {
                for &width in &self.widths {
                    out.push(GridPoint {
                        activation,
                        arm,
                        width,
                        depth: self.depth,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub activation: Activation,
    pub arm: Arm,
    pub width: usize,
    pub depth: usize,
}

impl GridPoint {
    /// Canonical serialization, also the ranking tie-breaker.
    pub fn key(&self) -> String {
        format!(
            "activation={};arm={};depth={};width={}",
            self.activation, self.arm, self.depth, self.width
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub folds: usize,
    pub seed: u64,
    pub adam_lr: f64,
    pub sgd_lr: f64,
    pub patience: usize,
    /// Share of each training fold held out to drive early stopping or the
    /// rollback schedule.
    pub inner_val_fraction: f64,
    /// Batch size, epochs, dropout and the schedule constants.
    pub train: TrainConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            folds: 4,
            seed: 0,
            adam_lr: 1e-3,
            sgd_lr: 1e-2,
            patience: 10,
            inner_val_fraction: 0.1,
            train: TrainConfig::perspective(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: GridPoint,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

/// Fold index for every example: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = (offset + j) % folds;
        }
        offset += members.len();
    }
    assignment
}

/// Per-class seeded holdout of `round(n * fraction)` examples, never the
/// whole class. Returns `(train, holdout)` indices in ascending order.
pub fn stratified_holdout(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut held = vec![false; labels.len()];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < 2 {
            continue;
        }
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * fraction).round() as usize).min(members.len() - 1);
        for &i in &members[..take] {
            held[i] = true;
        }
    }
    (0..labels.len()).partition(|&i| !held[i])
}

/// A trained grid point together with the standardizer fitted on its data.
pub struct TrainedPoint {
    pub network: Network,
    pub standardizer: Standardizer,
    pub state: TrainState,
}

/// Standardizes `data`, holds out an inner validation split and trains
/// `point` with its arm's optimizer and schedule.
pub fn train_point(data: &Dataset, task: Task, point: &GridPoint, config: &GridConfig, seed: u64) -> Result<TrainedPoint> {
    let names = (0..data.dim()).map(|i| format!("f{i}")).collect();
    let standardizer = Standardizer::fit_rows(&data.x, names)?;
    let scaled = Dataset::new(
        data.x.iter().map(|r| standardizer.transform_row(r)).collect::<Result<_>>()?,
        data.y.clone(),
    )?;
    let (tr, va) = stratified_holdout(&scaled.y, config.inner_val_fraction, seed);
    if va.is_empty() {
        return Err(Error::Data("too few examples for an inner validation split".into()));
    }
    let (train, val) = (scaled.subset(&tr), scaled.subset(&va));
    let schema = LabelSchema::for_task(task);
    let mlp = MlpConfig::deep(
        data.dim(),
        point.depth,
        point.width,
        schema.len(),
        point.activation,
        config.train.dropout_p,
    );
    let network = Network::head(mlp, seed)?;
    let (network, state) = match point.arm {
        Arm::AdamEarlyStop => {
            let tc = TrainConfig {
                optimizer: OptimizerKind::Adam,
                initial_lr: config.adam_lr,
                seed,
                ..config.train.clone()
            };
            train_earlystop(network, &train, &val, schema, &tc, config.patience)?
        }
        Arm::SgdAdaptive => {
            let tc = TrainConfig {
                optimizer: OptimizerKind::Sgd,
                initial_lr: config.sgd_lr,
                seed,
                ..config.train.clone()
            };
            train_adaptive(network, &train, &val, schema, &tc)?
        }
    };
    Ok(TrainedPoint {
        network,
        standardizer,
        state,
    })
}

/// Mean held-out macro-F1 of `point` over stratified folds.
pub fn cross_validate(data: &Dataset, task: Task, point: &GridPoint, config: &GridConfig) -> Result<GridResult> {
    let folds = stratified_folds(&data.y, config.folds, config.seed);
    let schema = LabelSchema::for_task(task);
    let mut fold_f1 = Vec::with_capacity(config.folds);
    for k in 0..config.folds {
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] != k);
        if test_idx.is_empty() {
            return Err(Error::Data(format!("fold {k} is empty")));
        }
        let trained = train_point(&data.subset(&train_idx), task, point, config, config.seed.wrapping_add(k as u64))?;
        let test = data.subset(&test_idx);
        let scaled = Dataset::new(
            test.x.iter().map(|r| trained.standardizer.transform_row(r)).collect::<Result<_>>()?,
            test.y.clone(),
        )?;
        let pred = predict_all(&trained.network, &scaled)?;
        fold_f1.push(macro_f1(&scaled.y, &pred, &schema)?);
    }
    let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
    Ok(GridResult {
        point: *point,
        fold_f1,
        mean_f1,
    })
}

/// Cross-validates every point of `space` (points run in parallel) and ranks
/// them by mean F1, ties broken by [`GridPoint::key`].
pub fn grid_search(data: &Dataset, task: Task, space: &GridSpace, config: &GridConfig) -> Result<Vec<GridResult>> {
    let points = space.points();
    if points.is_empty() {
        return Err(Error::Config("the search space is empty".into()));
    }
    if config.folds < 2 {
        return Err(Error::Config("grid search needs at least 2 folds".into()));
    }
    if data.len() < config.folds {
        return Err(Error::Data(format!("{} examples cannot fill {} folds", data.len(), config.folds)));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(points.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<GridResult>>>> = points.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let r = cross_validate(data, task, &points[i], config);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut results = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every point evaluated"))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| {
        b.mean_f1
            .partial_cmp(&a.mean_f1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.point.key().cmp(&b.point.key()))
    });
    Ok(results)
}

pub fn ranking_csv(results: &[GridResult]) -> String {
    let mut out = String::from("rank,activation,arm,depth,width,mean_f1,fold_f1\n");
    for (i, r) in results.iter().enumerate() {
        let folds: Vec<String> = r.fold_f1.iter().map(|f| format!("{f:.6}")).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{}\n",
            i + 1,
            r.point.activation,
            r.point.arm,
            r.point.depth,
            r.point.width,
            r.mean_f1,
            folds.join(";")
        ));
    }
    out
}
