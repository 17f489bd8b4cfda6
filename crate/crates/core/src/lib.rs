//! Offline evaluation of ranked recommendation outputs.
//!
//! The central metric is *commonality*: the probability that every user in a
//! population becomes familiar with an editorially selected category, where a
//! single user's familiarity is the expected category recall under a
//! rank-biased browsing model. Around it the crate provides
//!
//! - parsers for TREC-style run and qrels files and a TSV category map ([`corpus`]),
//! - the geometric stopping model ([`browse`]),
//! - familiarity, per-category log-commonality and Borda aggregation ([`commonality`]),
//! - the utility, fairness, diversity and novelty metrics commonality is compared
//!   against ([`metrics`]),
//! - Kendall's tau harnesses for correlation and robustness sweeps ([`analysis`]),
//! - the interleaved-promotion re-ranker and its utility/commonality sweep ([`interleave`]),
//! - a synthetic corpus generator ([`synth`]) and the command-line front end ([`cli`]).

pub mod analysis;
pub mod browse;
pub mod cli;
pub mod commonality;
pub mod corpus;
mod error;
pub mod interleave;
pub mod metrics;
pub mod seeding;
pub mod synth;

pub use browse::BrowsingModel;
pub use commonality::{
    borda_aggregate, category_commonality, category_recall, familiarity, BordaScore,
    CommonalityResult, FamiliarityScore, MissingUsers,
};
pub use corpus::{
    CatIdx, CategoryMap, Corpus, ItemIdx, Qrels, Ranking, RunSet, UserIdx, Vocab, Warning,
};
pub use error::{Error, Result};
pub use metrics::{EvalContext, Metric, MetricValue, Polarity};
