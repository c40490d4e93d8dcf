//! Sentence classification into the ABCD scheme.
//!
//! A [`ClassifierBackend`] maps an ordered list of sentences to one raw
//! prediction per sentence. [`classify_post`] enforces the contract: length and
//! order are preserved and every label is resolved against the scheme (with
//! one normalization pass for near-miss names) before it leaves this module.

mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::corpus::{SegmentedPost, Sentence};
use crate::taxonomy::{CategoryScheme, RawLabelEntry, Resolution, SentenceLabel};

pub use mock::MockClassifier;
pub use remote::{ClassifyRequest, ClassifyResponse, RemoteClassifier, WirePrediction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("classifier backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("classifier protocol error: {0}")]
    Protocol(String),
    #[error("invalid prediction for sentence {index}: {detail}")]
    InvalidPrediction { index: usize, detail: String },
    #[error("batch size must be positive")]
    InvalidBatchSize,
}

impl From<BackendError> for ClassifyError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unavailable(m) => ClassifyError::BackendUnavailable(m),
            BackendError::Protocol(m) | BackendError::Failed(m) => ClassifyError::Protocol(m),
        }
    }
}

/// What a backend returns for one sentence, before scheme resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub labels: Vec<RawLabelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Backend-specific reference to the raw payload (reply text, fixture key, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl RawPrediction {
    pub fn from_label(label: &SentenceLabel) -> Self {
        Self { labels: label.to_raw(), confidence: None, payload: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

/// A validated label for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: SentenceLabel,
    /// Missing when the backend gives no score; never defaulted for metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub provenance: Provenance,
}

impl Prediction {
    /// Confidence for display only: missing scores show as 1.0.
    pub fn display_confidence(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }
}

/// Contract for sentence classifiers. Implementations must tolerate
/// concurrent `classify` calls.
pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Whether several sentences may be sent in one call.
    fn supports_batching(&self) -> bool {
        true
    }

    /// Must return exactly one prediction per input sentence, in input order.
    fn classify(&self, sentences: &[Sentence], scheme: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError>;
}

impl<T: ClassifierBackend + ?Sized> ClassifierBackend for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn supports_batching(&self) -> bool {
        (**self).supports_batching()
    }

    fn classify(&self, sentences: &[Sentence], scheme: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
        (**self).classify(sentences, scheme)
    }
}

/// Resolves one raw prediction, normalizing category names once.
pub fn resolve_prediction(
    index: usize,
    raw: RawPrediction,
    backend: &str,
    scheme: &CategoryScheme,
) -> Result<Prediction, ClassifyError> {
    let label = scheme.resolve_label(&raw.labels, Resolution::Normalize).map_err(|violations| {
        ClassifyError::InvalidPrediction {
            index,
            detail: violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        }
    })?;
    if let Some(c) = raw.confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(ClassifyError::InvalidPrediction { index, detail: format!("confidence {c} outside [0, 1]") });
        }
    }
    Ok(Prediction {
        label: label.normalized(),
        confidence: raw.confidence,
        provenance: Provenance { backend: backend.to_string(), payload: raw.payload },
    })
}

/// Classifies every sentence of a segmented post, `batch_size` sentences per
/// backend call (one per call if the backend does not batch).
pub fn classify_post(
    post: &SegmentedPost,
    backend: &dyn ClassifierBackend,
    scheme: &CategoryScheme,
    batch_size: usize,
) -> Result<Vec<Prediction>, ClassifyError> {
    classify_sentences(&post.sentences, backend, scheme, batch_size)
}

pub fn classify_sentences(
    sentences: &[Sentence],
    backend: &dyn ClassifierBackend,
    scheme: &CategoryScheme,
    batch_size: usize,
) -> Result<Vec<Prediction>, ClassifyError> {
    if batch_size == 0 {
        return Err(ClassifyError::InvalidBatchSize);
    }
    let chunk = if backend.supports_batching() { batch_size } else { 1 };
    let mut out = Vec::with_capacity(sentences.len());
    for batch in sentences.chunks(chunk) {
        let raw = backend.classify(batch, scheme)?;
        if raw.len() != batch.len() {
            return Err(ClassifyError::Protocol(format!(
                "{} returned {} predictions for {} sentences",
                backend.name(),
                raw.len(),
                batch.len()
            )));
        }
        for r in raw {
            let index = out.len();
            out.push(resolve_prediction(index, r, backend.name(), scheme)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Post, Source};
    use crate::taxonomy::{ChildCategory, ParentCategory};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        reply: Vec<RawPrediction>,
        calls: AtomicUsize,
        batching: bool,
    }

    impl ClassifierBackend for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn supports_batching(&self) -> bool {
            self.batching
        }
        fn classify(&self, s: &[Sentence], _: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.reply.iter().cycle().take(s.len()).cloned().collect())
        }
    }

    fn post(text: &str) -> SegmentedPost {
        Post::new("p", Source::Reddit, Language::En, text).segment()
    }

    fn raw(parent: &str, children: &[&str]) -> RawPrediction {
        RawPrediction {
            labels: vec![RawLabelEntry {
                parent: parent.into(),
                children: children.iter().map(|c| c.to_string()).collect(),
            }],
            ..Default::default()
        }
    }

    #[test]
    fn near_miss_names_are_normalized() {
        let backend =
            Scripted { reply: vec![raw("(B) Belief", &["black and white thinking"])], calls: 0.into(), batching: true };
        let preds = classify_post(&post("One. Two."), &backend, &CategoryScheme::canonical(), 8).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(
            preds[0].label,
            SentenceLabel::empty().with(ParentCategory::Belief, [ChildCategory::AllOrNothingThinking])
        );
        assert_eq!(preds[0].provenance.backend, "scripted");
        assert_eq!(preds[0].display_confidence(), 1.0);
    }

    #[test]
    fn unknown_category_is_invalid_prediction() {
        let backend = Scripted { reply: vec![raw("B", &["catastrophizing"])], calls: 0.into(), batching: true };
        let err = classify_post(&post("One."), &backend, &CategoryScheme::canonical(), 8).unwrap_err();
        assert!(matches!(err, ClassifyError::InvalidPrediction { index: 0, .. }));
    }

    #[test]
    fn batching_controls_call_count() {
        let text = "a. b. c. d. e.";
        let batched = Scripted { reply: vec![RawPrediction::default()], calls: 0.into(), batching: true };
        classify_post(&post(text), &batched, &CategoryScheme::canonical(), 2).unwrap();
        assert_eq!(batched.calls.load(Ordering::SeqCst), 3);
        let single = Scripted { reply: vec![RawPrediction::default()], calls: 0.into(), batching: false };
        classify_post(&post(text), &single, &CategoryScheme::canonical(), 2).unwrap();
        assert_eq!(single.calls.load(Ordering::SeqCst), 5);
        assert_eq!(
            classify_post(&post(text), &single, &CategoryScheme::canonical(), 0),
            Err(ClassifyError::InvalidBatchSize)
        );
    }

    #[test]
    fn out_of_range_confidence_rejected() {
        let mut r = raw("A", &[]);
        r.confidence = Some(1.5);
        let backend = Scripted { reply: vec![r], calls: 0.into(), batching: true };
        assert!(matches!(
            classify_post(&post("x."), &backend, &CategoryScheme::canonical(), 1),
            Err(ClassifyError::InvalidPrediction { .. })
        ));
    }

    struct Short;
    impl ClassifierBackend for Short {
        fn name(&self) -> &str {
            "short"
        }
        fn classify(&self, s: &[Sentence], _: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
            Ok(vec![RawPrediction::default(); s.len().saturating_sub(1)])
        }
    }

    #[test]
    fn length_contract_enforced() {
        let err = classify_post(&post("a. b. c."), &Short, &CategoryScheme::canonical(), 8).unwrap_err();
        assert!(matches!(err, ClassifyError::Protocol(_)));
    }
}
