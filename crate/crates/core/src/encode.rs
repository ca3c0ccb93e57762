//! Text, hashtag and emoji embeddings and their concatenation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::TweetParts;

/// Sentence encoder seam. `encode` must return a finite vector of length
/// `dim()` for every input, including the empty string.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;

    /// Whether the encoder exposes parameters that training may update.
    fn trainable(&self) -> bool {
        false
    }

    fn encode(&self, text: &str) -> Vec<f64>;
}

/// Lowercased alphanumeric tokens.
pub fn hash_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Linear map applied on top of the hashed bag of words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub out_dim: usize,
    pub in_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub trainable: bool,
}

impl Projection {
    /// Glorot-uniform initialisation from `seed`.
    pub fn init(in_dim: usize, out_dim: usize, seed: u64, trainable: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Projection {
            out_dim,
            in_dim,
            weights,
            trainable,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// Feature-hashing bag-of-words encoder: each token is hashed to a signed
/// bucket and the bucket vector is L2-normalised. An optional projection
/// maps the buckets to a smaller dense space and can be fine-tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashingEncoder {
    buckets: usize,
    projection: Option<Projection>,
}

impl HashingEncoder {
    pub fn new(buckets: usize) -> Self {
        assert!(buckets > 0, "hashing encoder needs at least one bucket");
        HashingEncoder {
            buckets,
            projection: None,
        }
    }

    pub fn with_projection(buckets: usize, out_dim: usize, seed: u64, trainable: bool) -> Self {
        assert!(buckets > 0 && out_dim > 0);
        HashingEncoder {
            buckets,
            projection: Some(Projection::init(buckets, out_dim, seed, trainable)),
        }
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn projection(&self) -> Option<&Projection> {
        self.projection.as_ref()
    }

    pub fn set_projection(&mut self, projection: Projection) -> Result<()> {
        if projection.in_dim != self.buckets || projection.weights.len() != projection.in_dim * projection.out_dim {
            return Err(Error::Dimension(format!(
                "projection {}x{} does not fit {} buckets",
                projection.out_dim, projection.in_dim, self.buckets
            )));
        }
        self.projection = Some(projection);
        Ok(())
    }

    /// The normalised bucket vector, before any projection.
    pub fn hashed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.buckets];
        for token in hash_tokens(text) {
            let h = fnv1a(token.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.buckets as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.projection.as_ref().map_or(self.buckets, |p| p.out_dim)
    }

    fn trainable(&self) -> bool {
        self.projection.as_ref().is_some_and(|p| p.trainable)
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        let hashed = self.hashed(text);
        match &self.projection {
            Some(p) => p.apply(&hashed),
            None => hashed,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingRow {
    text: String,
    vector: Vec<f64>,
}

/// Adapter over sentence embeddings exported from an external pretrained
/// encoder as JSON lines `{"text": ..., "vector": [...]}`. The dimension is
/// taken from the file. Texts missing from the table encode to zeros and are
/// counted in [`PrecomputedEncoder::misses`].
#[derive(Debug)]
pub struct PrecomputedEncoder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    misses: AtomicUsize,
}

impl PrecomputedEncoder {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = HashMap::new();
        let mut dim = None;
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: EmbeddingRow = serde_json::from_str(line)
                .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
            let expected = *dim.get_or_insert(row.vector.len());
            if row.vector.len() != expected || expected == 0 {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("vector length {} != {expected}", row.vector.len()),
                ));
            }
            if row.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(path, idx + 1, "non-finite embedding value"));
            }
            table.insert(row.text, row.vector);
        }
        let dim = dim.ok_or_else(|| Error::parse(path, 1, "embedding table is empty"))?;
        Ok(PrecomputedEncoder {
            dim,
            table,
            misses: AtomicUsize::new(0),
        })
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

impl TextEncoder for PrecomputedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        match self.table.get(text) {
            Some(v) => v.clone(),
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                vec![0.0; self.dim]
            }
        }
    }
}

/// Emoji vectors (emoji2vec-style), all of length `dim`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmojiLexicon {
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

impl EmojiLexicon {
    pub fn new(dim: usize) -> Self {
        EmojiLexicon {
            vectors: HashMap::new(),
            dim,
        }
    }

    pub fn insert(&mut self, emoji: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension(format!(
                "emoji vector has length {}, lexicon dim is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("emoji vector".into()));
        }
        self.vectors.insert(emoji.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, emoji: &str) -> Option<&[f64]> {
        self.vectors.get(emoji).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Reads a word2vec text file: a `<count> <dim>` header, then one
/// `<emoji> <dim floats>` row per entry. Duplicate rows: last one wins.
pub fn load_emoji_lexicon(path: impl AsRef<Path>) -> Result<EmojiLexicon> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (count, dim) = match lines.next() {
        Some((_, header)) => {
            let nums: Vec<usize> = header
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, 1, "header must be `<count> <dim>`"))?;
            match nums[..] {
                [c, d] if d > 0 => (c, d),
                _ => return Err(Error::parse(path, 1, "header must be `<count> <dim>`")),
            }
        }
        None => return Err(Error::parse(path, 1, "missing header")),
    };

    let mut lexicon = EmojiLexicon::new(dim);
    let mut rows = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut fields = line.split_whitespace();
        let emoji = fields.next().unwrap_or_default().to_string();
        let values: Vec<f64> = fields
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, line_no, "non-numeric vector component"))?;
        if values.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("row {} has {} components, expected {dim}", rows + 1, values.len()),
            ));
        }
        if lexicon.get(&emoji).is_some() {
            log::warn!("{}:{line_no}: duplicate emoji {emoji}; last row wins", path.display());
        }
        lexicon
            .insert(emoji, values)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        rows += 1;
    }
    if rows != count {
        return Err(Error::parse(
            path,
            1,
            format!("header declares {count} rows but file has {rows}"),
        ));
    }
    Ok(lexicon)
}

/// Elementwise mean; the empty list yields the zero vector of `dim`.
///
/// Each coordinate is clamped to the observed min/max so rounding in the sum
/// cannot push the mean outside the input range.
pub fn average_embeddings<V: AsRef<[f64]>>(vectors: &[V], dim: usize) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        return Ok(vec![0.0; dim]);
    }
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::Dimension(format!(
            "cannot average vectors of length {} with length {dim}",
            bad.as_ref().len()
        )));
    }
    let n = vectors.len() as f64;
    Ok((0..dim)
        .map(|k| {
            let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for v in vectors {
                let x = v.as_ref()[k];
                sum += x;
                lo = lo.min(x);
                hi = hi.max(x);
            }
            (sum / n).clamp(lo, hi)
        })
        .collect())
}

/// Each hashtag's words are joined with single spaces, encoded, and the
/// encodings averaged.
pub fn embed_hashtags(segmented: &[Vec<String>], encoder: &dyn TextEncoder) -> Vec<f64> {
    let encoded: Vec<Vec<f64>> = segmented.iter().map(|w| encoder.encode(&w.join(" "))).collect();
    average_embeddings(&encoded, encoder.dim()).expect("encoder returned a vector of the wrong length")
}

/// Mean vector of the emojis present in the lexicon; unknown emojis are skipped.
pub fn embed_emojis<S: AsRef<str>>(emojis: &[S], lexicon: &EmojiLexicon) -> Vec<f64> {
    let known: Vec<&[f64]> = emojis.iter().filter_map(|e| lexicon.get(e.as_ref())).collect();
    average_embeddings(&known, lexicon.dim()).expect("lexicon vectors share one length")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Text,
    Hashtag,
    Emoji,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Text => "text",
            Channel::Hashtag => "hashtag",
            Channel::Emoji => "emoji",
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Channel::Text),
            "hashtag" | "hashtags" => Ok(Channel::Hashtag),
            "emoji" | "emojis" => Ok(Channel::Emoji),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

/// Enabled channels. The text channel is mandatory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Channel>", into = "Vec<Channel>")]
pub struct ChannelSet(BTreeSet<Channel>);

impl ChannelSet {
    pub fn new(channels: impl IntoIterator<Item = Channel>) -> Result<Self> {
        let set: BTreeSet<Channel> = channels.into_iter().collect();
        if !set.contains(&Channel::Text) {
            return Err(Error::Config("the text channel must be enabled".into()));
        }
        Ok(ChannelSet(set))
    }

    pub fn all() -> Self {
        ChannelSet([Channel::Text, Channel::Hashtag, Channel::Emoji].into())
    }

    pub fn text_only() -> Self {
        ChannelSet([Channel::Text].into())
    }

    pub fn contains(&self, channel: Channel) -> bool {
        self.0.contains(&channel)
    }

    /// Enabled channels in concatenation order.
    pub fn iter(&self) -> impl Iterator<Item = Channel> + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<Channel>> for ChannelSet {
    type Error = Error;

    fn try_from(v: Vec<Channel>) -> Result<Self> {
        ChannelSet::new(v)
    }
}

impl From<ChannelSet> for Vec<Channel> {
    fn from(set: ChannelSet) -> Self {
        set.0.into_iter().collect()
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelSet::new(
            s.split([',', '+'])
                .filter(|p| !p.trim().is_empty())
                .map(str::parse)
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Channel::as_str).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSlice {
    pub channel: Channel,
    pub offset: usize,
    pub len: usize,
}

/// Offsets of the enabled channels, in the fixed order text, hashtag, emoji.
/// Text and hashtag channels share the encoder dimension.
pub fn channel_layout(channels: &ChannelSet, text_dim: usize, emoji_dim: usize) -> Vec<ChannelSlice> {
    let mut offset = 0;
    channels
        .iter()
        .map(|channel| {
            let len = match channel {
                Channel::Text | Channel::Hashtag => text_dim,
                Channel::Emoji => emoji_dim,
            };
            let slice = ChannelSlice {
                channel,
                offset,
                len,
            };
            offset += len;
            slice
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedFeatures {
    pub vector: Vec<f64>,
    pub channel_spec: Vec<ChannelSlice>,
    /// Presence flags for text, hashtag, emoji.
    pub mask: [bool; 3],
}

impl FusedFeatures {
    pub fn slice(&self, channel: Channel) -> Option<&[f64]> {
        self.channel_spec
            .iter()
            .find(|s| s.channel == channel)
            .map(|s| &self.vector[s.offset..s.offset + s.len])
    }
}

/// Concatenates text, averaged-hashtag and averaged-emoji embeddings for the
/// enabled channels.
pub fn fuse(
    parts: &TweetParts,
    encoder: &dyn TextEncoder,
    lexicon: &EmojiLexicon,
    channels: &ChannelSet,
) -> Result<FusedFeatures> {
    let channel_spec = channel_layout(channels, encoder.dim(), lexicon.dim());
    let total = channel_spec.last().map_or(0, |s| s.offset + s.len);
    let mut vector = Vec::with_capacity(total);
    for slice in &channel_spec {
        let part = match slice.channel {
            Channel::Text => encoder.encode(&parts.cleaned_text),
            Channel::Hashtag => embed_hashtags(&parts.segmented_hashtags, encoder),
            Channel::Emoji => embed_emojis(&parts.emojis, lexicon),
        };
        if part.len() != slice.len {
            return Err(Error::Dimension(format!(
                "{} channel produced {} values, expected {}",
                slice.channel.as_str(),
                part.len(),
                slice.len
            )));
        }
        vector.extend(part);
    }
    Ok(FusedFeatures {
        vector,
        channel_spec,
        mask: [
            channels.contains(Channel::Text),
            channels.contains(Channel::Hashtag),
            channels.contains(Channel::Emoji),
        ],
    })
}
