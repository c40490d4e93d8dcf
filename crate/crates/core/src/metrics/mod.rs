//! Classification and summarization metrics.
//!
//! Scores are computed as fractions in [0, 1]; reports multiply by 100 and
//! round to two decimals only when rendering.

mod classification;
mod text;
mod tokenize;

use thiserror::Error;

pub use classification::{
    classification_report, count_confusion, micro_prf, ClassificationReport, ConfusionCounts, Counts, Level,
    LevelReport,
};
pub use text::{bleu4, evaluate_summaries, rouge_l, rouge_n, score_pair, BleuScore, PairScores, Prf, SummaryScores};
pub use tokenize::Tokenizer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{gold} gold labels but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no instances to evaluate")]
    EmptyInput,
}

/// Fraction to a percentage string with two decimals.
pub fn percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}
