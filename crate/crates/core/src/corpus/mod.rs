//! Posts, sentences, annotations and the dataset plumbing around them:
//! segmentation, length filtering, post-level splits, JSONL corpus files and
//! manifest arithmetic checks.

mod io;
mod manifest;
mod segment;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{LabelViolation, ParentCategory, SentenceLabel};

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus, AnnotationRecord, PostRecord, SummaryPairRecord};
pub use manifest::{bundled_manifest, DatasetManifest, ManifestCheck, ManifestReport, ManifestRow, SplitCounts};
pub use segment::segment;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence}: invalid label ({})", join_violations(.violations))]
    Label { sentence: String, violations: Vec<LabelViolation> },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
}

fn join_violations(v: &[LabelViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Weibo,
    Reddit,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    En,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub source: Source,
    pub language: Language,
    pub text: String,
}

impl Post {
    pub fn new(id: impl Into<String>, source: Source, language: Language, text: impl Into<String>) -> Self {
        Self { id: id.into(), source, language, text: text.into() }
    }

    pub fn segment(&self) -> SegmentedPost {
        SegmentedPost { sentences: segment(&self.id, &self.text, self.language), post: self.clone() }
    }

    /// Whitespace tokens for English, non-whitespace characters for Chinese.
    pub fn word_count(&self) -> usize {
        match self.language {
            Language::En => self.text.split_whitespace().count(),
            Language::Zh => self.text.chars().filter(|c| !c.is_whitespace()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub post_id: String,
    pub index: usize,
    pub text: String,
}

impl Sentence {
    /// `post_id#index`, used in error messages and as a positional fixture key.
    pub fn key(&self) -> String {
        format!("{}#{}", self.post_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedPost {
    pub post: Post,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub gold: SentenceLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryPair {
    pub post_id: String,
    pub parent: ParentCategory,
    pub source_text: String,
    pub reference_summary: String,
}

/// Everything a corpus file can hold, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub posts: Vec<Post>,
    pub annotations: Vec<AnnotatedSentence>,
    pub summary_pairs: Vec<SummaryPair>,
}

impl Corpus {
    pub fn post(&self, id: &str) -> Option<&Post> {
        self.posts.iter().find(|p| p.id == id)
    }

    /// Annotations of one post ordered by sentence index.
    pub fn annotations_for(&self, post_id: &str) -> Vec<&AnnotatedSentence> {
        let mut out: Vec<_> = self.annotations.iter().filter(|a| a.sentence.post_id == post_id).collect();
        out.sort_by_key(|a| a.sentence.index);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_words: usize,
    /// Drop posts containing any non-ASCII character. Off by default because it
    /// empties a Chinese corpus.
    pub ascii_filter: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { min_words: 100, ascii_filter: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    TooShort { words: usize, min_words: usize },
    NonAscii,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::TooShort { words, min_words } => write!(f, "{words} words < {min_words}"),
            ExclusionReason::NonAscii => f.write_str("contains non-ASCII characters"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub post_id: String,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub retained: Vec<Post>,
    pub excluded: Vec<Exclusion>,
}

/// Removes posts shorter than `min_words` ("shorter than" is strict, so a post
/// of exactly `min_words` stays) and, optionally, non-ASCII posts.
pub fn filter_posts(posts: impl IntoIterator<Item = Post>, config: FilterConfig) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for post in posts {
        let words = post.word_count();
        let reason = if words < config.min_words {
            Some(ExclusionReason::TooShort { words, min_words: config.min_words })
        } else if config.ascii_filter && !post.text.is_ascii() {
            Some(ExclusionReason::NonAscii)
        } else {
            None
        };
        match reason {
            Some(reason) => outcome.excluded.push(Exclusion { post_id: post.id, reason }),
            None => outcome.retained.push(post),
        }
    }
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, post_id: &str) -> Option<Split> {
        self.assignments.get(post_id).copied()
    }

    pub fn counts(&self) -> SplitCounts {
        let mut counts = SplitCounts::default();
        for split in self.assignments.values() {
            *counts.get_mut(*split) += 1;
        }
        counts
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

/// Split sizes `(floor(r0*n), floor(r1*n), remainder)`.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3], CorpusError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    // The epsilon absorbs representation error, e.g. 0.6 * 555 = 332.99999999999994.
    let take = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = take(ratios[0]).min(n);
    let val = take(ratios[1]).min(n - train);
    Ok([train, val, n - train - val])
}

/// Post-level split. Post ids are sorted, shuffled with a ChaCha8 stream keyed
/// by `seed`, then cut into train/val/test by [`split_sizes`].
pub fn split<'a>(
    post_ids: impl IntoIterator<Item = &'a str>,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, CorpusError> {
    let mut ids: Vec<&str> = post_ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let [train, val, _] = split_sizes(ids.len(), ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (id.to_string(), split)
        })
        .collect();
    Ok(SplitAssignment { seed, assignments })
}

pub fn split_posts(posts: &[Post], ratios: [f64; 3], seed: u64) -> Result<SplitAssignment, CorpusError> {
    split(posts.iter().map(|p| p.id.as_str()), ratios, seed)
}
