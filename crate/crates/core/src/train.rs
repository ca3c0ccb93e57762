//! Training loops: the validation-F1 gated scheduler with checkpoint
//! rollback, plain early stopping, and regime planning.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{Mode, Network, Optimizer, OptimizerKind, ParamSet};
use crate::encode::ChannelSet;
use crate::error::{Error, Result};
use crate::eval::macro_f1;
use crate::ingest::{LabelSchema, Language, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Mono,
    Multi,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mono" => Ok(Regime::Mono),
            "multi" => Ok(Regime::Multi),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Mono => "mono",
            Regime::Multi => "multi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    Frozen,
    Finetune,
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frozen" | "freeze" => Ok(EncoderMode::Frozen),
            "finetune" | "fine-tune" | "tuned" => Ok(EncoderMode::Finetune),
            other => Err(Error::Config(format!("unknown encoder mode `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderMode::Frozen => "frozen",
            EncoderMode::Finetune => "finetune",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_floor: f64,
    pub decay_factor: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub dropout_p: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub regime: Regime,
    pub encoder_mode: EncoderMode,
    pub channels: ChannelSet,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 2e-5,
            lr_floor: 1e-12,
            decay_factor: 0.5,
            batch_size: 32,
            max_epochs: 100,
            dropout_p: 0.2,
            adam_eps: 1e-8,
            seed: 0,
            regime: Regime::Mono,
            encoder_mode: EncoderMode::Frozen,
            channels: ChannelSet::all(),
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    /// Fine-tuning preset with the larger Adam epsilon.
    pub fn tuned() -> Self {
        TrainConfig {
            adam_eps: 1e-7,
            encoder_mode: EncoderMode::Finetune,
            ..TrainConfig::default()
        }
    }

    /// Defaults for the toxicity-score MLPs.
    pub fn perspective() -> Self {
        TrainConfig {
            batch_size: 200,
            channels: ChannelSet::text_only(),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return bad(format!("decay_factor {} not in (0,1)", self.decay_factor));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial_lr {} must be positive", self.initial_lr));
        }
        if !(self.lr_floor < self.initial_lr) {
            return bad(format!("lr_floor {} must be below initial_lr {}", self.lr_floor, self.initial_lr));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} not in [0,1)", self.dropout_p));
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam_eps {} must be positive", self.adam_eps));
        }
        Ok(())
    }

    /// Reads a JSON or TOML file (chosen by extension; anything other than
    /// `.toml` is parsed as JSON). Missing keys keep their defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: TrainConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }
}

/// Feature vectors with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Data(format!("{} feature rows but {} labels", x.len(), y.len())));
        }
        if let Some(first) = x.first() {
            if x.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Dimension("feature rows differ in length".into()));
            }
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Eval-mode argmax predictions for every row.
pub fn predict_all(network: &Network, data: &Dataset) -> Result<Vec<usize>> {
    data.x.iter().map(|x| network.predict(x).map(|(label, _)| label)).collect()
}

/// Scores the model after each epoch.
pub trait Evaluator {
    fn evaluate(&mut self, network: &Network, epoch: usize) -> Result<f64>;
}

/// Macro-F1 on a labelled validation set.
pub struct ValidationF1<'a> {
    data: &'a Dataset,
    schema: LabelSchema,
}

impl<'a> ValidationF1<'a> {
    pub fn new(data: &'a Dataset, schema: LabelSchema) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("validation set is empty".into()));
        }
        Ok(ValidationF1 { data, schema })
    }
}

impl Evaluator for ValidationF1<'_> {
    fn evaluate(&mut self, network: &Network, _epoch: usize) -> Result<f64> {
        macro_f1(&self.data.y, &predict_all(network, self.data)?, &self.schema)
    }
}

/// Replays a fixed score sequence; the last value repeats.
pub struct ScriptedEvaluator {
    scores: Vec<f64>,
}

impl ScriptedEvaluator {
    pub fn new(scores: Vec<f64>) -> Self {
        assert!(!scores.is_empty());
        ScriptedEvaluator { scores }
    }
}

impl Evaluator for ScriptedEvaluator {
    fn evaluate(&mut self, _network: &Network, epoch: usize) -> Result<f64> {
        Ok(self.scores[(epoch - 1).min(self.scores.len() - 1)])
    }
}

impl<F: FnMut(&Network, usize) -> Result<f64>> Evaluator for F {
    fn evaluate(&mut self, network: &Network, epoch: usize) -> Result<f64> {
        self(network, epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    /// Learning rate in effect during the epoch.
    pub lr: f64,
    pub val_f1: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub network: Network,
    pub optimizer: Optimizer,
    pub best_network: Network,
    pub best_optimizer: Optimizer,
    pub best_val_f1: f64,
    pub lr: f64,
    pub epoch: usize,
    pub rollbacks: usize,
    pub history: Vec<HistoryEntry>,
}

impl TrainState {
    fn new(network: Network, config: &TrainConfig) -> Self {
        let optimizer = Optimizer::new(config.optimizer, &network, config.initial_lr, config.adam_eps);
        TrainState {
            best_network: network.clone(),
            best_optimizer: optimizer.clone(),
            network,
            optimizer,
            best_val_f1: f64::NEG_INFINITY,
            lr: config.initial_lr,
            epoch: 0,
            rollbacks: 0,
            history: Vec::new(),
        }
    }

    fn snapshot(&mut self) {
        self.best_network = self.network.clone();
        self.best_optimizer = self.optimizer.clone();
    }

    fn restore(&mut self) {
        self.network = self.best_network.clone();
        self.optimizer = self.best_optimizer.clone();
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,lr,val_f1,accepted\n");
        for h in &self.history {
            out.push_str(&format!("{},{:e},{},{}\n", h.epoch, h.lr, h.val_f1, h.accepted));
        }
        out
    }

    pub fn write_history(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.history_csv()).map_err(|e| Error::io(path, e))
    }
}

/// One shuffled pass of mini-batch updates. Returns the mean training loss,
/// or `None` if a loss or gradient was non-finite.
fn run_epoch(state: &mut TrainState, data: &Dataset, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Option<f64>> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let mut grad = state.network.zeros_like();
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let (loss, g) = state.network.loss_and_grad(&data.x[i], data.y[i], Mode::Train, rng.gen())?;
            if !loss.is_finite() {
                return Ok(None);
            }
            total += loss;
            grad.add_scaled(&g, scale);
        }
        match state.optimizer.step(&mut state.network, &grad) {
            Ok(()) => {}
            Err(Error::NonFinite(what)) => {
                log::warn!("epoch {}: non-finite {what}", state.epoch);
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Some(total / data.len() as f64))
}

fn check_data(model: &Network, train: &Dataset, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if train.dim() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "training features have length {}, model expects {}",
            train.dim(),
            model.input_dim()
        )));
    }
    if let Some(&bad) = train.y.iter().find(|&&y| y >= model.num_classes()) {
        return Err(Error::UnknownLabel(format!("class index {bad}")));
    }
    Ok(())
}

/// Validation-F1 gated training.
///
/// After every epoch the model is scored. A score at least as good as the
/// best so far is accepted; a strictly better one also becomes the new
/// snapshot of parameters and optimizer state. A worse (or non-finite) score
/// restores that snapshot and multiplies the learning rate by
/// `decay_factor`. Training stops once the learning rate falls below
/// `lr_floor` or after `max_epochs`, and the best snapshot is returned.
pub fn train_adaptive_with(
    model: Network,
    train: &Dataset,
    evaluator: &mut dyn Evaluator,
    config: &TrainConfig,
) -> Result<(Network, TrainState)> {
    check_data(&model, train, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = TrainState::new(model, config);
    while state.epoch < config.max_epochs {
        state.epoch += 1;
        let epoch_lr = state.lr;
        let score = match run_epoch(&mut state, train, config, &mut rng)? {
            Some(_) => evaluator.evaluate(&state.network, state.epoch)?,
            None => f64::NAN,
        };
        let accepted = score.is_finite() && score >= state.best_val_f1;
        if accepted {
            if score > state.best_val_f1 {
                state.best_val_f1 = score;
                state.snapshot();
            }
        } else {
            state.restore();
            state.rollbacks += 1;
            state.lr *= config.decay_factor;
            state.optimizer.set_lr(state.lr);
        }
        log::debug!("epoch {} lr {epoch_lr:e} val_f1 {score:.4} accepted {accepted}", state.epoch);
        state.history.push(HistoryEntry {
            epoch: state.epoch,
            lr: epoch_lr,
            val_f1: score,
            accepted,
        });
        if state.lr < config.lr_floor {
            break;
        }
    }
    Ok((state.best_network.clone(), state))
}

pub fn train_adaptive(
    model: Network,
    train: &Dataset,
    val: &Dataset,
    schema: LabelSchema,
    config: &TrainConfig,
) -> Result<(Network, TrainState)> {
    let mut evaluator = ValidationF1::new(val, schema)?;
    train_adaptive_with(model, train, &mut evaluator, config)
}

/// Early stopping on validation macro-F1 at a fixed learning rate: stops
/// once `patience` consecutive epochs fail to beat the best score and
/// returns the best snapshot.
pub fn train_earlystop_with(
    model: Network,
    train: &Dataset,
    evaluator: &mut dyn Evaluator,
    config: &TrainConfig,
    patience: usize,
) -> Result<(Network, TrainState)> {
    if patience == 0 {
        return Err(Error::Config("patience must be at least 1".into()));
    }
    check_data(&model, train, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = TrainState::new(model, config);
    let mut stale = 0;
    while state.epoch < config.max_epochs {
        state.epoch += 1;
        let score = match run_epoch(&mut state, train, config, &mut rng)? {
            Some(_) => evaluator.evaluate(&state.network, state.epoch)?,
            None => {
                state.restore();
                f64::NAN
            }
        };
        let improved = score.is_finite() && score > state.best_val_f1;
        if improved {
            state.best_val_f1 = score;
            state.snapshot();
            stale = 0;
        } else {
            stale += 1;
        }
        state.history.push(HistoryEntry {
            epoch: state.epoch,
            lr: state.lr,
            val_f1: score,
            accepted: improved,
        });
        if stale >= patience {
            break;
        }
    }
    Ok((state.best_network.clone(), state))
}

pub fn train_earlystop(
    model: Network,
    train: &Dataset,
    val: &Dataset,
    schema: LabelSchema,
    config: &TrainConfig,
    patience: usize,
) -> Result<(Network, TrainState)> {
    let mut evaluator = ValidationF1::new(val, schema)?;
    train_earlystop_with(model, train, &mut evaluator, config, patience)
}

/// One model to train: a task and the languages whose data it sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimeJob {
    pub task: Task,
    pub languages: Vec<Language>,
    pub seed: u64,
}

/// `seed` offset by a stable hash of the (sorted) language set and task, so
/// a single-language job has the same seed in either regime.
pub fn job_seed(seed: u64, languages: &[Language], task: Task) -> u64 {
    let mut langs: Vec<Language> = languages.to_vec();
    langs.sort();
    langs.dedup();
    let key: Vec<&str> = langs.iter().map(|l| l.as_str()).collect();
    let key = format!("{}|{}", key.join("+"), task.as_str());
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed.wrapping_add(h)
}

/// Mono: one job per language. Multi: a single job over all languages.
pub fn plan_regime(regime: Regime, task: Task, languages: &[Language], seed: u64) -> Result<Vec<RegimeJob>> {
    if languages.is_empty() {
        return Err(Error::Config("no languages selected".into()));
    }
    let mut langs = languages.to_vec();
    langs.sort();
    langs.dedup();
    Ok(match regime {
        Regime::Mono => langs
            .iter()
            .map(|&l| RegimeJob {
                task,
                languages: vec![l],
                seed: job_seed(seed, &[l], task),
            })
            .collect(),
        Regime::Multi => vec![RegimeJob {
            task,
            seed: job_seed(seed, &langs, task),
            languages: langs,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Activation, MlpConfig};

    fn toy() -> (Network, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y = x.iter().map(|r| usize::from(r[0] > 0.0)).collect();
        let net = Network::head(MlpConfig::two_layer_head(4, 2, Activation::Tanh, 0.2), 1).unwrap();
        (net, Dataset::new(x, y).unwrap())
    }

    fn config() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            max_epochs: 100,
            ..TrainConfig::default()
        }
    }

    fn bits(net: &Network) -> Vec<u64> {
        net.tensors().iter().flat_map(|t| t.data.iter().map(|v| v.to_bits())).collect()
    }

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        assert_eq!((c.initial_lr, c.lr_floor, c.decay_factor, c.dropout_p), (2e-5, 1e-12, 0.5, 0.2));
        c.validate().unwrap();
        assert_eq!(TrainConfig::tuned().adam_eps, 1e-7);
        assert_eq!(TrainConfig::perspective().batch_size, 200);
        let bad = TrainConfig {
            decay_factor: 1.0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { lr_floor: 1.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        fs::write(&toml_path, "seed = 7\nchannels = [\"text\", \"emoji\"]\nregime = \"multi\"\n").unwrap();
        let c = TrainConfig::from_file(&toml_path).unwrap();
        assert_eq!((c.seed, c.regime, c.initial_lr), (7, Regime::Multi, 2e-5));
        assert_eq!(c.channels.to_string(), "text,emoji");
        let json_path = dir.path().join("run.json");
        fs::write(&json_path, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(TrainConfig::from_file(&json_path).unwrap(), c);
        fs::write(&json_path, r#"{"channels": ["emoji"]}"#).unwrap();
        assert!(TrainConfig::from_file(&json_path).is_err());
        fs::write(&json_path, r#"{"learning_rate": 1}"#).unwrap();
        assert!(TrainConfig::from_file(&json_path).is_err());
    }

    #[test]
    fn single_rollback_restores_epoch_one() {
        let (net, data) = toy();
        let mut snapshots = Vec::new();
        let mut eval = |n: &Network, epoch: usize| {
            snapshots.push(bits(n));
            Ok([0.5, 0.4][(epoch - 1).min(1)])
        };
        let cfg = TrainConfig { max_epochs: 2, ..config() };
        let (best, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        assert_eq!(state.lr, 2e-5 * 0.5);
        assert_eq!(bits(&best), snapshots[0]);
        assert_eq!(bits(&state.network), snapshots[0]);
        assert_eq!(state.optimizer, {
            let mut o = state.best_optimizer.clone();
            o.set_lr(state.lr);
            o
        });
    }

    #[test]
    fn improving_scores_never_roll_back() {
        let (net, data) = toy();
        let mut eval = |_: &Network, epoch: usize| Ok(epoch as f64 / 1000.0);
        let cfg = TrainConfig { max_epochs: 30, ..config() };
        let (_, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        assert_eq!(state.rollbacks, 0);
        assert_eq!(state.epoch, 30);
        assert!(state.history.iter().all(|h| h.accepted && h.lr == 2e-5));
    }

    #[test]
    fn always_degrading_stops_after_25_rollbacks() {
        let (net, data) = toy();
        let mut eval = |_: &Network, epoch: usize| Ok(1.0 / epoch as f64);
        let (_, state) = train_adaptive_with(net, &data, &mut eval, &config()).unwrap();
        assert_eq!(state.rollbacks, 25);
        assert_eq!(state.epoch, 26);
        for (k, h) in state.history.iter().skip(1).enumerate() {
            assert_eq!(h.lr, 2e-5 * 0.5f64.powi(k as i32));
        }
        assert_eq!(state.lr, 2e-5 * 0.5f64.powi(25));
        assert!(state.lr < 1e-12 && state.lr * 2.0 >= 1e-12);
    }

    #[test]
    fn ties_are_accepted_without_a_new_snapshot() {
        let (net, data) = toy();
        let mut seen = Vec::new();
        let mut eval = |n: &Network, _| {
            seen.push(bits(n));
            Ok(0.5)
        };
        let cfg = TrainConfig { max_epochs: 3, ..config() };
        let (best, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        assert_eq!(state.rollbacks, 0);
        assert_eq!(bits(&best), seen[0]);
        assert_ne!(bits(&state.network), seen[0]);
    }

    #[test]
    fn accepted_scores_are_monotone() {
        let (net, data) = toy();
        let scores = [0.3, 0.5, 0.4, 0.6, 0.2, 0.6, 0.7, 0.1];
        let mut eval = ScriptedEvaluator::new(scores.to_vec());
        let cfg = TrainConfig { max_epochs: 8, ..config() };
        let (_, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        let accepted: Vec<f64> = state.history.iter().filter(|h| h.accepted).map(|h| h.val_f1).collect();
        assert_eq!(accepted, [0.3, 0.5, 0.6, 0.6, 0.7]);
        assert_eq!(state.best_val_f1, 0.7);
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let (net, data) = toy();
            let (best, state) = train_adaptive(net, &data, &data.clone(), LabelSchema::for_task(Task::Task1), &TrainConfig {
                initial_lr: 1e-2,
                max_epochs: 15,
                ..config()
            })
            .unwrap();
            (bits(&best), state.history_csv())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn real_training_learns_the_toy_problem() {
        let (net, data) = toy();
        let cfg = TrainConfig {
            initial_lr: 1e-2,
            max_epochs: 60,
            ..config()
        };
        let (_, state) = train_adaptive(net, &data, &data.clone(), LabelSchema::for_task(Task::Task1), &cfg).unwrap();
        assert!(state.best_val_f1 >= 0.9, "{}", state.best_val_f1);
    }

    #[test]
    fn non_finite_training_counts_as_degradation() {
        let (net, mut data) = toy();
        data.x[0][0] = f64::NAN;
        let cfg = TrainConfig { max_epochs: 3, ..config() };
        let mut eval = ScriptedEvaluator::new(vec![1.0]);
        let before = bits(&net);
        let (best, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        assert_eq!(state.rollbacks, 3);
        assert_eq!(bits(&best), before);
        assert!(state.history.iter().all(|h| h.val_f1.is_nan()));
    }

    #[test]
    fn empty_inputs_are_errors() {
        let (net, data) = toy();
        let empty = Dataset::new(vec![], vec![]).unwrap();
        let mut eval = ScriptedEvaluator::new(vec![0.5]);
        assert!(train_adaptive_with(net.clone(), &empty, &mut eval, &config()).is_err());
        assert!(train_adaptive(net, &data, &empty, LabelSchema::for_task(Task::Task1), &config()).is_err());
    }

    #[test]
    fn early_stopping_examples() {
        let (net, data) = toy();
        let mut seen = Vec::new();
        let mut eval = |n: &Network, epoch: usize| {
            seen.push(bits(n));
            Ok([0.6, 0.5, 0.5][(epoch - 1).min(2)])
        };
        let (best, state) = train_earlystop_with(net.clone(), &data, &mut eval, &config(), 2).unwrap();
        assert_eq!(state.epoch, 3);
        assert_eq!(bits(&best), seen[0]);

        let mut flat = ScriptedEvaluator::new(vec![0.5]);
        let cfg = TrainConfig { max_epochs: 5, ..config() };
        let (_, state) = train_earlystop_with(net.clone(), &data, &mut flat, &cfg, 10).unwrap();
        assert_eq!(state.epoch, 5);

        let mut rising = |_: &Network, e: usize| Ok(e as f64 / 100.0);
        let (_, state) = train_earlystop_with(net.clone(), &data, &mut rising, &cfg, 1).unwrap();
        assert_eq!(state.epoch, 5);
        assert!(train_earlystop_with(net, &data, &mut rising, &cfg, 0).is_err());
    }

    #[test]
    fn sgd_arm_uses_the_same_rollback_rule() {
        let (net, data) = toy();
        let mut eval = ScriptedEvaluator::new(vec![0.5, 0.4]);
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            max_epochs: 4,
            ..config()
        };
        let (_, state) = train_adaptive_with(net, &data, &mut eval, &cfg).unwrap();
        assert_eq!(state.rollbacks, 3);
        assert_eq!(state.optimizer, Optimizer::Sgd { lr: 2e-5 / 8.0 });
    }

    #[test]
    fn regime_plans() {
        let langs = Language::ALL;
        let mono: usize = Task::ALL.iter().map(|&t| plan_regime(Regime::Mono, t, &langs, 1).unwrap().len()).sum();
        let multi: usize = Task::ALL.iter().map(|&t| plan_regime(Regime::Multi, t, &langs, 1).unwrap().len()).sum();
        assert_eq!((mono, multi), (6, 2));
        let a = plan_regime(Regime::Mono, Task::Task1, &[Language::De], 9).unwrap();
        let b = plan_regime(Regime::Multi, Task::Task1, &[Language::De], 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(job_seed(9, &[Language::En], Task::Task1), job_seed(9, &[Language::En], Task::Task2));
        assert!(plan_regime(Regime::Multi, Task::Task1, &[], 0).is_err());
    }
}
