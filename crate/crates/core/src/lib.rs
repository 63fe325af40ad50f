//! Online multilabel ranking boosters that learn from top-k feedback.
//!
//! Each round the booster ranks all `m` labels, plays a randomized version
//! of that ranking, and observes relevance only for the `k` labels it put
//! on top. Importance-weighted pair estimates turn that partial feedback
//! into unbiased cost vectors for a bank of online weak learners.

pub mod booster;
pub mod data;
pub mod error;
pub mod experiment;
pub mod label;
pub mod loss;
pub mod potential;
pub mod randomize;
pub mod weaklearn;

pub use error::{Error, Result};
pub use label::{rank_of_scores, Feedback, LabelId, Ranking, RelevanceSet, ScoreVector};
pub use loss::{loss, weighted_rank_loss, PairwiseLoss};
