//! Polarity inference for hashtags and tokens from a small seed set.
//!
//! The pipeline runs: [`corpus`] ingestion and tokenization, [`lexgraph`]
//! co-occurrence (or embedding k-NN) graph construction, [`proplabel`] seed
//! propagation, [`polarity`] aggregation to tweets, users and days, and
//! [`evalkit`] scoring against gold labels. [`commnet`] builds the user
//! communication network and [`synthgen`] produces planted test corpora.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the CLI uses.

pub mod commnet;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod lexgraph;
pub mod polarity;
pub mod proplabel;
pub mod scalar;
pub mod synthgen;
mod tsv;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use corpus::{TokenizedTweet, TweetRecord, UserDayKey};
pub use polarity::{Scale, TernaryLabel};

/// Co-occurrence or k-NN graph with `f64` weights.
pub type CooccurrenceGraph = lexgraph::CooccurrenceGraph<f64>;
/// Embedding table with `f64` components.
pub type EmbeddingTable = lexgraph::EmbeddingTable<f64>;
/// Seed lexicon with `f64` endpoint values.
pub type SeedLexicon = proplabel::SeedLexicon<f64>;
/// Propagated lexicon with `f64` scores.
pub type PolarityLexicon = proplabel::PolarityLexicon<f64>;
/// Aggregated polarity with an `f64` value.
pub type PolarityScore = polarity::PolarityScore<f64>;
/// Per-group daily series with `f64` statistics.
pub type DailySeries = polarity::DailySeries<f64>;
/// User communication graph with `f64` polarity attributes.
pub type CommGraph = commnet::CommGraph<f64>;
/// Evaluation report with `f64` rates.
pub type EvalReport = evalkit::EvalReport<f64>;
