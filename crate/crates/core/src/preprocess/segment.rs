//! Hashtag segmentation by maximum-likelihood unigram decoding.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-probability assigned to a word missing from the lexicon:
/// `-(base + per_char * len)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OovPenalty {
    pub base: f64,
    pub per_char: f64,
}

impl Default for OovPenalty {
    fn default() -> Self {
        OovPenalty {
            base: 10.0,
            per_char: 3.0,
        }
    }
}

impl OovPenalty {
    pub fn log_prob(&self, len_chars: usize) -> f64 {
        -(self.base + self.per_char * len_chars as f64)
    }
}

/// Unigram counts used by the segmenter. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmenterLexicon {
    frequencies: HashMap<String, u64>,
    total: u64,
    max_word_len: usize,
}

impl SegmenterLexicon {
    /// Builds a lexicon from `(word, count)` pairs. Words are lowercased and
    /// duplicates summed; non-alphanumeric words and zero counts are skipped.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut lex = SegmenterLexicon::default();
        for (word, count) in counts {
            lex.insert(word.as_ref(), count);
        }
        lex
    }

    fn insert(&mut self, word: &str, count: u64) {
        let word = word.to_lowercase();
        if word.is_empty() || count == 0 || !word.chars().all(char::is_alphanumeric) {
            log::warn!("skipping lexicon entry `{word}` ({count})");
            return;
        }
        self.max_word_len = self.max_word_len.max(word.chars().count());
        self.total += count;
        *self.frequencies.entry(word).or_default() += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.frequencies.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// `ln(count/total)` for known words, the OOV penalty otherwise.
    pub fn log_prob(&self, word: &str, oov: &OovPenalty) -> f64 {
        match self.frequencies.get(word) {
            Some(&c) if self.total > 0 => (c as f64 / self.total as f64).ln(),
            _ => oov.log_prob(word.chars().count()),
        }
    }
}

/// Reads a `word<TAB>count` file (any whitespace separator is accepted).
pub fn build_lexicon(path: impl AsRef<Path>) -> Result<SegmenterLexicon> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lex = SegmenterLexicon::default();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(word), Some(count), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::parse(path, idx + 1, "expected `word<TAB>count`"));
        };
        let count: u64 = count
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("count `{count}` is not an integer")))?;
        lex.insert(word, count);
    }
    Ok(lex)
}

/// Sum of per-word log-probabilities, accumulated left to right.
pub fn segmentation_score(words: &[String], lexicon: &SegmenterLexicon, oov: &OovPenalty) -> f64 {
    words
        .iter()
        .fold(0.0, |acc, w| acc + lexicon.log_prob(w, oov))
}

/// Orders candidate segmentations: higher score, then fewer words, then the
/// lexicographically smallest word sequence.
pub fn compare_candidates(a: (f64, &[String]), b: (f64, &[String])) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(b.1))
}

/// Segments a hashtag with the default OOV penalty.
pub fn segment_hashtag(tag: &str, lexicon: &SegmenterLexicon) -> Vec<String> {
    segment_hashtag_with(tag, lexicon, &OovPenalty::default())
}

/// Segments a hashtag (leading `#` optional). Camel-case boundaries in the
/// original spelling split the tag into chunks that are decoded
/// independently; the concatenated output always equals the lowercased tag.
pub fn segment_hashtag_with(tag: &str, lexicon: &SegmenterLexicon, oov: &OovPenalty) -> Vec<String> {
    let tag = tag.trim_start_matches('#');
    if tag.is_empty() {
        return Vec::new();
    }
    if !tag.chars().any(char::is_alphanumeric) {
        return vec![tag.to_lowercase()];
    }
    camel_chunks(tag)
        .into_iter()
        .flat_map(|chunk| segment_chunk(&chunk.to_lowercase(), lexicon, oov))
        .collect()
}

fn camel_chunks(tag: &str) -> Vec<String> {
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for c in tag.chars() {
        if let Some(p) = prev {
            if p.is_lowercase() && c.is_uppercase() && !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
        prev = Some(c);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Viterbi decoding over an already-lowercased string. Every span may be an
/// OOV word, so candidate predecessors range over all earlier positions.
pub fn segment_chunk(text: &str, lexicon: &SegmenterLexicon, oov: &OovPenalty) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut best: Vec<Option<(f64, Vec<String>)>> = vec![None; n + 1];
    best[0] = Some((0.0, Vec::new()));
    for end in 1..=n {
        let mut winner: Option<(f64, Vec<String>)> = None;
        for start in 0..end {
            let Some((prefix_score, prefix_words)) = &best[start] else {
                continue;
            };
            let word: String = chars[start..end].iter().collect();
            let score = prefix_score + lexicon.log_prob(&word, oov);
            let mut words = prefix_words.clone();
            words.push(word);
            let replace = match &winner {
                None => true,
                Some((ws, wwords)) => {
                    compare_candidates((score, &words), (*ws, wwords)) == Ordering::Less
                }
            };
            if replace {
                winner = Some((score, words));
            }
        }
        best[end] = winner;
    }
    best[n].take().map(|(_, words)| words).unwrap_or_default()
}
