//! Sentence-pair semantic similarity by fusing three scorers: TF-IDF
//! cosine over pair-scoped vectors, a Jaccard coefficient weighted by
//! grammatical-role agreement, and a convolutional scorer over word
//! vectors weighted by multi-feature attention.
//!
//! Per-model weights are a softmax over each model's validation metric;
//! the weighted scores are combined by a weighted sum or a small learned
//! network and classified with the 0.5 rule.

pub mod attention;
pub mod cli;
pub mod cnn;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod fusion;
pub mod jaccard;
pub mod metrics;
pub mod params_io;
pub mod pipeline;
pub mod tfidf;

pub use error::{Error, Result};
