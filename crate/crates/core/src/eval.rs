//! Macro-F1, per-class precision/recall/F1, confusion matrices and result
//! tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LabelSchema, Language, Task};

fn check_inputs(gold: &[usize], pred: &[usize], schema: &LabelSchema) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Data(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Data("cannot evaluate an empty label list".into()));
    }
    if let Some(&bad) = gold.iter().chain(pred).find(|&&l| l >= schema.len()) {
        return Err(Error::UnknownLabel(format!("class index {bad}")));
    }
    Ok(())
}

/// Precision, recall and F1 from raw tallies; every zero denominator yields 0.
fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Unweighted mean of per-class F1 over every class of `schema`, including
/// classes absent from both `gold` and `pred`.
pub fn macro_f1(gold: &[usize], pred: &[usize], schema: &LabelSchema) -> Result<f64> {
    check_inputs(gold, pred, schema)?;
    let k = schema.len();
    let (mut tp, mut fp, mut fn_) = (vec![0u64; k], vec![0u64; k], vec![0u64; k]);
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    Ok(mean((0..k).map(|c| prf(tp[c], fp[c], fn_[c]).2), k))
}

/// Convenience wrapper over label names.
pub fn macro_f1_named<S: AsRef<str>>(gold: &[S], pred: &[S], schema: &LabelSchema) -> Result<f64> {
    let index = |v: &[S]| v.iter().map(|l| schema.index_of(l.as_ref())).collect::<Result<Vec<_>>>();
    macro_f1(&index(gold)?, &index(pred)?, schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub schema: LabelSchema,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        let k = self.counts.len();
        (0..k)
            .map(|c| {
                let tp = self.counts[c][c];
                let fp = (0..k).filter(|&g| g != c).map(|g| self.counts[g][c]).sum();
                let fn_ = (0..k).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
                let (precision, recall, f1) = prf(tp, fp, fn_);
                ClassMetrics {
                    label: self.schema.name(c).to_string(),
                    precision,
                    recall,
                    f1,
                    support: self.counts[c].iter().sum(),
                }
            })
            .collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let per_class = self.per_class();
        mean(per_class.iter().map(|m| m.f1), per_class.len())
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.counts.len()).map(|c| self.counts[c][c]).sum();
        correct as f64 / self.total() as f64
    }
}

pub fn confusion(gold: &[usize], pred: &[usize], schema: &LabelSchema) -> Result<ConfusionMatrix> {
    check_inputs(gold, pred, schema)?;
    let k = schema.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        schema: schema.clone(),
        counts,
    })
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: Task,
    pub records: u64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn compute(gold: &[usize], pred: &[usize], task: Task) -> Result<Self> {
        let schema = LabelSchema::for_task(task);
        let matrix = confusion(gold, pred, &schema)?;
        Ok(Metrics {
            task,
            records: matrix.total(),
            macro_f1: matrix.macro_f1(),
            accuracy: matrix.accuracy(),
            per_class: matrix.per_class(),
            confusion: matrix,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Scores keyed by model name, language and task.
pub type Results = BTreeMap<(String, Language, Task), f64>;

fn columns() -> Vec<(Language, Task)> {
    Language::ALL
        .iter()
        .flat_map(|&l| Task::ALL.iter().map(move |&t| (l, t)))
        .collect()
}

fn rows(results: &Results) -> Vec<Vec<String>> {
    let mut models: Vec<&str> = results.keys().map(|(m, _, _)| m.as_str()).collect();
    models.dedup();
    models
        .into_iter()
        .map(|model| {
            let mut row = vec![model.to_string()];
            for (lang, task) in columns() {
                row.push(
                    results
                        .get(&(model.to_string(), lang, task))
                        .map_or_else(|| "-".to_string(), |s| format_score(*s)),
                );
            }
            row
        })
        .collect()
}

fn header() -> Vec<String> {
    let mut h = vec!["model".to_string()];
    h.extend(columns().into_iter().map(|(l, t)| format!("{l} {t}")));
    h
}

/// Score in percent with two decimals.
pub fn format_score(score: f64) -> String {
    format!("{:.2}", score * 100.0)
}

pub fn render_markdown(results: &Results) -> String {
    let head = header();
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", head.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
    for row in rows(results) {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out
}

pub fn render_tsv(results: &Results) -> String {
    let mut out = header().join("\t") + "\n";
    for row in rows(results) {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Writes `results.md` and `results.tsv` into `dir`.
pub fn write_report(results: &Results, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for (name, body) in [("results.md", render_markdown(results)), ("results.tsv", render_tsv(results))] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t1() -> LabelSchema {
        LabelSchema::for_task(Task::Task1)
    }

    #[test]
    fn perfect_predictions() {
        let gold = [0, 1, 1, 0, 1];
        assert_eq!(macro_f1(&gold, &gold, &t1()).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_binary_example() {
        let f = macro_f1_named(&["NOT", "NOT", "HOF", "HOF"], &["NOT", "HOF", "HOF", "HOF"], &t1()).unwrap();
        // NOT: P=1 R=1/2 F1=2/3; HOF: P=2/3 R=1 F1=4/5
        assert!((f - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        let m = confusion(&[0, 0, 1, 1], &[0, 1, 1, 1], &t1()).unwrap();
        assert_eq!(m.counts, [[1, 1], [0, 2]]);
        assert_eq!(m.macro_f1(), f);
    }

    #[test]
    fn absent_classes_count_as_zero() {
        let schema = LabelSchema::for_task(Task::Task2);
        let f = macro_f1_named(&["NONE"; 3], &["NONE"; 3], &schema).unwrap();
        assert_eq!(f, 0.25);
    }

    #[test]
    fn input_errors() {
        assert!(macro_f1(&[0], &[0, 1], &t1()).is_err());
        assert!(macro_f1(&[], &[], &t1()).is_err());
        assert!(macro_f1(&[2], &[0], &t1()).is_err());
        assert!(confusion(&[], &[], &t1()).is_err());
        assert!(macro_f1_named(&["NOT"], &["MAYBE"], &t1()).is_err());
    }

    #[test]
    fn diagonal_confusion() {
        let m = confusion(&[0, 1], &[0, 1], &t1()).unwrap();
        assert_eq!(m.counts, [[1, 0], [0, 1]]);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn report_rendering() {
        let mut results = Results::new();
        assert_eq!(render_tsv(&results).lines().count(), 1);
        assert_eq!(render_markdown(&results).lines().count(), 2);
        results.insert(("xlmr".into(), Language::En, Task::Task1), 0.9029);
        let tsv = render_tsv(&results);
        assert!(tsv.lines().nth(1).unwrap().starts_with("xlmr\t90.29\t-"), "{tsv}");
        results.insert(("bow".into(), Language::Hi, Task::Task2), 0.5);
        let a = render_markdown(&results);
        assert_eq!(a, render_markdown(&results.clone()));
        assert!(a.lines().nth(2).unwrap().starts_with("| bow |"));
        assert!(a.lines().next().unwrap().contains("en task1 | en task2 | de task1"));
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60), rot in 0usize..60) {
            let schema = LabelSchema::for_task(Task::Task2);
            let (g, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.rotate_left(rot % pairs.len());
            shuffled.reverse();
            let (g2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            let f = macro_f1(&g, &p, &schema).unwrap();
            prop_assert_eq!(f, macro_f1(&g2, &p2, &schema).unwrap());
            prop_assert!((0.0..=1.0).contains(&f));
            if f == 1.0 {
                prop_assert_eq!(&g, &p);
            }
            if g == p && (0..4).all(|c| g.contains(&c)) {
                prop_assert_eq!(f, 1.0);
            }
            prop_assert_eq!(confusion(&g, &p, &schema).unwrap().macro_f1(), f);
        }
    }
}
