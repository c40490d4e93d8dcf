//! Groups classified sentences into one composite text per parent category
//! and summarizes each composite, producing the per-post cognitive pathway.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{join_url, BackendError, HttpClient, HttpError};
use crate::classifier::{classify_post, ClassifierBackend, ClassifyError, Prediction};
use crate::corpus::{Post, Sentence};
use crate::taxonomy::{CategoryScheme, ParentCategory, SentenceLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSentence {
    pub parent: ParentCategory,
    pub text: String,
    /// Strictly increasing sentence indices.
    pub member_indices: Vec<usize>,
}

/// Summarizes one composite. Plain-text backends see only the composite text;
/// prompt-based backends may also use the parent's name.
pub trait SummarizerBackend: Send + Sync {
    fn name(&self) -> &str;
    fn summarize(&self, composite: &CompositeSentence) -> Result<String, BackendError>;
}

impl<T: SummarizerBackend + ?Sized> SummarizerBackend for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn summarize(&self, composite: &CompositeSentence) -> Result<String, BackendError> {
        (**self).summarize(composite)
    }
}

/// Returns the composite text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentitySummarizer;

impl SummarizerBackend for IdentitySummarizer {
    fn name(&self) -> &str {
        "identity"
    }

    fn summarize(&self, composite: &CompositeSentence) -> Result<String, BackendError> {
        Ok(composite.text.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub parent: ParentCategory,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub summary: String,
}

/// Client for a summarization model served over HTTP: `POST /summarize`
/// with `{parent, text}`, answered by `{summary}`. One retry on transient
/// failure, like [`crate::classifier::RemoteClassifier`].
#[derive(Debug, Clone)]
pub struct RemoteSummarizer {
    url: String,
    http: HttpClient,
}

impl RemoteSummarizer {
    pub fn new(endpoint_url: &str, auth_token: Option<String>) -> Self {
        Self { url: join_url(endpoint_url, "summarize"), http: HttpClient::new(Duration::from_secs(120), auth_token) }
    }
}

impl SummarizerBackend for RemoteSummarizer {
    fn name(&self) -> &str {
        "remote"
    }

    fn summarize(&self, composite: &CompositeSentence) -> Result<String, BackendError> {
        let body = SummarizeRequest { parent: composite.parent, text: composite.text.clone() };
        let response: SummarizeResponse = match self.http.post_json(&self.url, &body) {
            Err(e) if e.is_transient() => self.http.post_json(&self.url, &body),
            other => other,
        }
        .map_err(HttpError::into_backend_error)?;
        Ok(response.summary)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathwayError {
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("summarization failed for every parent ({})", describe_failures(.0))]
    SummarizationFailed(BTreeMap<ParentCategory, BackendError>),
}

fn describe_failures(f: &BTreeMap<ParentCategory, BackendError>) -> String {
    f.iter().map(|(p, e)| format!("{p}: {e}")).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Classification,
    Summarization,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Classification => "classification",
            Stage::Summarization => "summarization",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("{stage} backend unavailable: {detail}")]
    BackendUnavailable { stage: Stage, detail: String },
    #[error(transparent)]
    Classification(ClassifyError),
    #[error(transparent)]
    Pathway(#[from] PathwayError),
}

impl PipelineError {
    pub fn is_backend_unavailable(&self) -> bool {
        matches!(self, PipelineError::BackendUnavailable { .. })
    }
}

impl From<ClassifyError> for PipelineError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::BackendUnavailable(detail) => {
                PipelineError::BackendUnavailable { stage: Stage::Classification, detail }
            }
            other => PipelineError::Classification(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathwayConfig {
    /// Placed between member sentences of a composite.
    pub separator: String,
    pub batch_size: usize,
}

impl Default for PathwayConfig {
    fn default() -> Self {
        Self { separator: " ".into(), batch_size: 16 }
    }
}

/// Builds one composite per parent present in the labels. Only parents matter;
/// a sentence labelled with two parents joins both composites.
pub fn assemble_labels(
    sentences: &[Sentence],
    labels: &[&SentenceLabel],
    separator: &str,
) -> Result<BTreeMap<ParentCategory, CompositeSentence>, PathwayError> {
    if sentences.len() != labels.len() {
        return Err(PathwayError::ContractViolation(format!(
            "{} sentences but {} labels",
            sentences.len(),
            labels.len()
        )));
    }
    let mut out: BTreeMap<ParentCategory, CompositeSentence> = BTreeMap::new();
    for (sentence, label) in sentences.iter().zip(labels) {
        for parent in label.parents() {
            let composite = out.entry(parent).or_insert_with(|| CompositeSentence {
                parent,
                text: String::new(),
                member_indices: Vec::new(),
            });
            if !composite.member_indices.is_empty() {
                composite.text.push_str(separator);
            }
            composite.text.push_str(&sentence.text);
            composite.member_indices.push(sentence.index);
        }
    }
    Ok(out)
}

pub fn assemble(
    sentences: &[Sentence],
    predictions: &[Prediction],
    separator: &str,
) -> Result<BTreeMap<ParentCategory, CompositeSentence>, PathwayError> {
    let labels: Vec<&SentenceLabel> = predictions.iter().map(|p| &p.label).collect();
    assemble_labels(sentences, &labels, separator)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryOutcome {
    pub summaries: BTreeMap<ParentCategory, String>,
    pub failures: BTreeMap<ParentCategory, BackendError>,
}

/// One backend call per composite, run concurrently. Failures are kept per
/// parent; the call fails only if every parent failed.
pub fn summarize_pathway(
    composites: &BTreeMap<ParentCategory, CompositeSentence>,
    backend: &dyn SummarizerBackend,
) -> Result<SummaryOutcome, PathwayError> {
    let results: Vec<(ParentCategory, Result<String, BackendError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = composites
            .iter()
            .map(|(parent, composite)| (*parent, scope.spawn(move || backend.summarize(composite))))
            .collect();
        handles
            .into_iter()
            .map(|(p, h)| {
                let r = h.join().unwrap_or_else(|_| Err(BackendError::Failed("summarizer panicked".into())));
                (p, r)
            })
            .collect()
    });
    let mut outcome = SummaryOutcome::default();
    for (parent, result) in results {
        match result {
            Ok(summary) => {
                outcome.summaries.insert(parent, summary);
            }
            Err(e) => {
                outcome.failures.insert(parent, e);
            }
        }
    }
    if !composites.is_empty() && outcome.summaries.is_empty() {
        return Err(PathwayError::SummarizationFailed(outcome.failures));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CognitivePathway {
    pub post_id: String,
    pub composites: BTreeMap<ParentCategory, CompositeSentence>,
    pub summaries: BTreeMap<ParentCategory, String>,
    /// Parents whose composite exists but whose summarization failed.
    pub failures: BTreeMap<ParentCategory, String>,
}

/// Full result of running the pipeline on one post.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub sentences: Vec<Sentence>,
    pub predictions: Vec<Prediction>,
    pub pathway: CognitivePathway,
}

/// segment → classify → assemble → summarize.
pub fn extract_pathway(
    post: &Post,
    classifier: &dyn ClassifierBackend,
    summarizer: &dyn SummarizerBackend,
    scheme: &CategoryScheme,
    config: &PathwayConfig,
) -> Result<Extraction, PipelineError> {
    let segmented = post.segment();
    let predictions = classify_post(&segmented, classifier, scheme, config.batch_size)?;
    let composites = assemble(&segmented.sentences, &predictions, &config.separator)?;
    let outcome = match summarize_pathway(&composites, summarizer) {
        Ok(o) => o,
        Err(PathwayError::SummarizationFailed(failures))
            if failures.values().all(|e| matches!(e, BackendError::Unavailable(_))) =>
        {
            return Err(PipelineError::BackendUnavailable {
                stage: Stage::Summarization,
                detail: describe_failures(&failures),
            })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Extraction {
        sentences: segmented.sentences,
        predictions,
        pathway: CognitivePathway {
            post_id: post.id.clone(),
            composites,
            summaries: outcome.summaries,
            failures: outcome.failures.into_iter().map(|(p, e)| (p, e.to_string())).collect(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayEntryExport {
    pub composite: String,
    pub summary: Option<String>,
    pub member_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `{"post_id", "pathway": {"A": {"composite", "summary", "member_indices"}, ...}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayExport {
    pub post_id: String,
    pub pathway: BTreeMap<ParentCategory, PathwayEntryExport>,
}

impl From<&CognitivePathway> for PathwayExport {
    fn from(p: &CognitivePathway) -> Self {
        PathwayExport {
            post_id: p.post_id.clone(),
            pathway: p
                .composites
                .iter()
                .map(|(parent, c)| {
                    (
                        *parent,
                        PathwayEntryExport {
                            composite: c.text.clone(),
                            summary: p.summaries.get(parent).cloned(),
                            member_indices: c.member_indices.clone(),
                            error: p.failures.get(parent).cloned(),
                        },
                    )
                })
                .collect(),
        }
    }
}

impl From<PathwayExport> for CognitivePathway {
    fn from(e: PathwayExport) -> Self {
        let mut out = CognitivePathway { post_id: e.post_id, ..Default::default() };
        for (parent, entry) in e.pathway {
            out.composites.insert(
                parent,
                CompositeSentence { parent, text: entry.composite, member_indices: entry.member_indices },
            );
            if let Some(s) = entry.summary {
                out.summaries.insert(parent, s);
            }
            if let Some(err) = entry.error {
                out.failures.insert(parent, err);
            }
        }
        out
    }
}

impl CognitivePathway {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&PathwayExport::from(self)).expect("pathway export serializes")
    }
}
