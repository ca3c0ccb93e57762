//! Multilingual hate-speech detection.
//!
//! A tweet is decomposed into cleaned text plus hashtag, emoji, mention, URL,
//! number, smiley and reserved-word channels ([`preprocess`]). The text and
//! segmented hashtags are embedded with a [`encode::TextEncoder`], emojis are
//! looked up in a vector lexicon, and the channel embeddings are concatenated
//! ([`encode::fuse`]). A small feed-forward head ([`classify`]) predicts the
//! coarse (NOT/HOF) or fine (NONE/HATE/OFFN/PRFN) label and is trained by
//! [`train::train_adaptive`], which rolls back to the best checkpoint and
//! decays the learning rate whenever validation macro-F1 drops.
//!
//! The [`perspective`] module builds toxicity-score feature vectors from a
//! remote scoring service and runs the deep-MLP grid search over them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod encode;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod perspective;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use ingest::{Corpus, Language, LabelSchema, Task, TweetRecord};
pub use preprocess::TweetParts;
