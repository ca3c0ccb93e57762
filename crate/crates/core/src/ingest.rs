//! Labeled tweet corpora: TSV loading, validation, stratified splitting and
//! multilingual aggregation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VAL_FRACTION: f64 = 0.1;
pub const DEFAULT_SPLIT_SEED: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Hi,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::De, Language::Hi];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Hi => "hi",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "de" => Ok(Language::De),
            "hi" => Ok(Language::Hi),
            other => Err(Error::Config(format!("unknown language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Task1,
    Task2,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Task1, Task::Task2];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Task1 => "task1",
            Task::Task2 => "task2",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "").as_str() {
            "task1" | "1" => Ok(Task::Task1),
            "task2" | "2" => Ok(Task::Task2),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Task-1 label: hateful-or-offensive or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoarseLabel {
    #[serde(rename = "NOT")]
    Not,
    #[serde(rename = "HOF")]
    Hof,
}

/// Task-2 label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FineLabel {
    #[serde(rename = "NONE")]
    None,
    #[serde(rename = "HATE")]
    Hate,
    #[serde(rename = "OFFN")]
    Offn,
    #[serde(rename = "PRFN")]
    Prfn,
}

impl CoarseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarseLabel::Not => "NOT",
            CoarseLabel::Hof => "HOF",
        }
    }

    /// Position in the task-1 [`LabelSchema`].
    pub fn index(self) -> usize {
        match self {
            CoarseLabel::Not => 0,
            CoarseLabel::Hof => 1,
        }
    }
}

impl FineLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FineLabel::None => "NONE",
            FineLabel::Hate => "HATE",
            FineLabel::Offn => "OFFN",
            FineLabel::Prfn => "PRFN",
        }
    }

    /// Position in the task-2 [`LabelSchema`].
    pub fn index(self) -> usize {
        match self {
            FineLabel::None => 0,
            FineLabel::Hate => 1,
            FineLabel::Offn => 2,
            FineLabel::Prfn => 3,
        }
    }

    /// The coarse label implied by a fine label.
    pub fn coarse(self) -> CoarseLabel {
        match self {
            FineLabel::None => CoarseLabel::Not,
            _ => CoarseLabel::Hof,
        }
    }
}

impl FromStr for CoarseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NOT" => Ok(CoarseLabel::Not),
            "HOF" => Ok(CoarseLabel::Hof),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

impl FromStr for FineLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NONE" => Ok(FineLabel::None),
            "HATE" => Ok(FineLabel::Hate),
            "OFFN" => Ok(FineLabel::Offn),
            "PRFN" => Ok(FineLabel::Prfn),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Ordered class list for a task. Index order is fixed: task 1 is
/// `[NOT, HOF]`, task 2 is `[NONE, HATE, OFFN, PRFN]`. Argmax ties resolve
/// to the lowest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub task: Task,
    pub classes: Vec<String>,
}

impl LabelSchema {
    pub fn for_task(task: Task) -> Self {
        let classes: &[&str] = match task {
            Task::Task1 => &["NOT", "HOF"],
            Task::Task2 => &["NONE", "HATE", "OFFN", "PRFN"],
        };
        LabelSchema {
            task,
            classes: classes.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        let upper = label.trim().to_ascii_uppercase();
        self.classes
            .iter()
            .position(|c| *c == upper)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.classes[index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub language: Language,
    pub task1: Option<CoarseLabel>,
    pub task2: Option<FineLabel>,
}

impl TweetRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Data("empty tweet id".into()));
        }
        if let (Some(t1), Some(t2)) = (self.task1, self.task2) {
            if t2.coarse() != t1 {
                return Err(Error::InconsistentLabels {
                    id: self.id.clone(),
                    task1: t1.as_str().into(),
                    task2: t2.as_str().into(),
                });
            }
        }
        Ok(())
    }

    /// Class index of this record under `task`, if labeled.
    pub fn label_index(&self, task: Task) -> Option<usize> {
        match task {
            Task::Task1 => self.task1.map(CoarseLabel::index),
            Task::Task2 => self.task2.map(FineLabel::index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusLanguage {
    En,
    De,
    Hi,
    Multi,
}

impl From<Language> for CorpusLanguage {
    fn from(lang: Language) -> Self {
        match lang {
            Language::En => CorpusLanguage::En,
            Language::De => CorpusLanguage::De,
            Language::Hi => CorpusLanguage::Hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<TweetRecord>,
    pub language: CorpusLanguage,
    pub split_tag: SplitTag,
}

impl Corpus {
    /// Builds a corpus, checking every record and id uniqueness.
    pub fn new(
        records: Vec<TweetRecord>,
        language: CorpusLanguage,
        split_tag: SplitTag,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            record.validate()?;
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId(record.id.clone()));
            }
        }
        Ok(Corpus {
            records,
            language,
            split_tag,
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Per-class counts in schema order. Unlabeled records are ignored.
    pub fn label_counts(&self, task: Task) -> Vec<usize> {
        let mut counts = vec![0; LabelSchema::for_task(task).len()];
        for r in &self.records {
            if let Some(i) = r.label_index(task) {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Gold class indices for `task`; errors if any record is unlabeled.
    pub fn labels(&self, task: Task) -> Result<Vec<usize>> {
        self.records
            .iter()
            .map(|r| {
                r.label_index(task).ok_or_else(|| {
                    Error::Data(format!("record {} has no {task} label", r.id))
                })
            })
            .collect()
    }
}

/// Maps TSV header names onto record fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub text: String,
    pub task1: String,
    pub task2: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "tweet_id".into(),
            text: "text".into(),
            task1: "task_1".into(),
            task2: "task_2".into(),
        }
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Parses `role=column` pairs, e.g. `id=ID,task1=task1`. Unlisted roles
    /// keep their default column names.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = ColumnMap::default();
        for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (role, column) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad column mapping `{pair}`")))?;
            let slot = match role.trim() {
                "id" => &mut map.id,
                "text" => &mut map.text,
                "task1" => &mut map.task1,
                "task2" => &mut map.task2,
                other => return Err(Error::Config(format!("unknown column role `{other}`"))),
            };
            *slot = column.trim().to_string();
        }
        Ok(map)
    }
}

/// Loads a training-split corpus with the default column names.
pub fn load_corpus(path: impl AsRef<Path>, language: Language) -> Result<Corpus> {
    load_corpus_with(path, language, SplitTag::Train, &ColumnMap::default())
}

pub fn load_corpus_with(
    path: impl AsRef<Path>,
    language: Language,
    split_tag: SplitTag,
    columns: &ColumnMap,
) -> Result<Corpus> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content, path, language, split_tag, columns)
}

fn parse_corpus(
    content: &str,
    path: &Path,
    language: Language,
    split_tag: SplitTag,
    columns: &ColumnMap,
) -> Result<Corpus> {
    let mut lines = content
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) if !h.is_empty() => h.split('\t').collect(),
        _ => return Err(Error::parse(path, 1, "missing header row")),
    };
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let id_col = find(&columns.id)
        .ok_or_else(|| Error::parse(path, 1, format!("missing column `{}`", columns.id)))?;
    let text_col = find(&columns.text)
        .ok_or_else(|| Error::parse(path, 1, format!("missing column `{}`", columns.text)))?;
    let task1_col = find(&columns.task1);
    let task2_col = find(&columns.task2);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != header.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} columns, found {}", header.len(), fields.len()),
            ));
        }
        let cell = |col: Option<usize>| col.map(|c| fields[c].trim()).filter(|v| !v.is_empty());
        let at = |e: Error| Error::parse(path, line_no, e.to_string());
        let record = TweetRecord {
            id: fields[id_col].trim().to_string(),
            text: fields[text_col].to_string(),
            language,
            task1: cell(task1_col).map(str::parse).transpose().map_err(at)?,
            task2: cell(task2_col).map(str::parse).transpose().map_err(at)?,
        };
        record.validate().map_err(at)?;
        if !seen.insert(record.id.clone()) {
            return Err(at(Error::DuplicateId(record.id)));
        }
        records.push(record);
    }
    Ok(Corpus {
        records,
        language: language.into(),
        split_tag,
    })
}

/// Writes a corpus in the canonical four-column layout. Absent labels are
/// written as empty cells.
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("tweet_id\ttext\ttask_1\ttask_2\n");
    for r in corpus.records() {
        if r.text.contains(['\t', '\n', '\r']) || r.id.contains(['\t', '\n', '\r']) {
            return Err(Error::Data(format!(
                "record {} contains a tab or line break and cannot be written as TSV",
                r.id
            )));
        }
        out.push_str(&r.id);
        out.push('\t');
        out.push_str(&r.text);
        out.push('\t');
        out.push_str(r.task1.map(CoarseLabel::as_str).unwrap_or(""));
        out.push('\t');
        out.push_str(r.task2.map(FineLabel::as_str).unwrap_or(""));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Splits off a validation set with per-class proportions matching
/// `val_fraction`. Both halves keep the original record order.
pub fn stratified_split(
    corpus: &Corpus,
    task: Task,
    val_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Config(format!(
            "val_fraction must be in (0,1), got {val_fraction}"
        )));
    }
    let labels = corpus.labels(task)?;
    let schema = LabelSchema::for_task(task);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_val = vec![false; labels.len()];
    for (class, mut members) in by_class {
        if members.len() < 2 {
            log::warn!(
                "class {} has {} member(s); keeping it entirely in train",
                schema.name(class),
                members.len()
            );
            continue;
        }
        let n_val = ((members.len() as f64 * val_fraction).round() as usize).min(members.len() - 1);
        members.shuffle(&mut rng);
        for &i in &members[..n_val] {
            in_val[i] = true;
        }
    }

    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (record, is_val) in corpus.records.iter().zip(in_val) {
        if is_val {
            val.push(record.clone());
        } else {
            train.push(record.clone());
        }
    }
    Ok((
        Corpus {
            records: train,
            language: corpus.language,
            split_tag: corpus.split_tag,
        },
        Corpus {
            records: val,
            language: corpus.language,
            split_tag: SplitTag::Val,
        },
    ))
}

/// Concatenates corpora in input order. Ids that occur in more than one input
/// are re-namespaced as `<lang>:<id>`.
pub fn aggregate_multilingual(corpora: &[Corpus]) -> Result<Corpus> {
    let split_tag = match corpora.first() {
        Some(c) => c.split_tag,
        None => {
            return Ok(Corpus {
                records: Vec::new(),
                language: CorpusLanguage::Multi,
                split_tag: SplitTag::Train,
            })
        }
    };
    if corpora.iter().any(|c| c.split_tag != split_tag) {
        return Err(Error::Data("cannot aggregate corpora with different split tags".into()));
    }

    let mut occurrences: HashMap<&str, usize> = HashMap::new();
    for corpus in corpora {
        for r in corpus.records() {
            *occurrences.entry(r.id.as_str()).or_default() += 1;
        }
    }

    let mut records = Vec::with_capacity(corpora.iter().map(Corpus::len).sum());
    for corpus in corpora {
        for r in corpus.records() {
            let mut r = r.clone();
            if occurrences[r.id.as_str()] > 1 {
                r.id = format!("{}:{}", r.language, r.id);
            }
            records.push(r);
        }
    }
    Corpus::new(records, CorpusLanguage::Multi, split_tag)
}
