//! In-memory state rebuilt from the record log.

use std::collections::BTreeMap;

use cogpath_core::classifier::Prediction;
use cogpath_core::corpus::{AnnotatedSentence, AnnotationRecord, Post, Sentence};
use cogpath_core::pathway::PathwayExport;
use cogpath_core::{CategoryScheme, LabelViolation, ParentCategory, SentenceLabel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub post_id: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    PostIngested { post: Post },
    AnnotationProposed { sentence: SentenceRef, annotator_id: String, label: SentenceLabel },
    Adjudicated { sentence: SentenceRef, adjudicator_id: String, label: SentenceLabel, superseded: Vec<u64> },
    PathwayStored { backend: String, pathway: PathwayExport, predictions: Vec<Prediction> },
    PathwayReviewed { post_id: String, editor_id: String, summaries: BTreeMap<ParentCategory, String>, approved: bool },
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub timestamp: String,
    #[serde(flatten)]
    pub record: Record,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplyError {
    #[error("unknown post {0:?}")]
    UnknownPost(String),
    #[error("post {post_id:?} has no sentence {index}")]
    UnknownSentence { post_id: String, index: usize },
    #[error("invalid label")]
    InvalidLabel(Vec<LabelViolation>),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Conflict(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPost {
    pub post: Post,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub annotator_id: String,
    pub label: SentenceLabel,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub id: u64,
    pub adjudicator_id: String,
    pub label: SentenceLabel,
    pub superseded: Vec<u64>,
    pub timestamp: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub summaries: BTreeMap<ParentCategory, String>,
    pub approved: bool,
    pub editor_id: Option<String>,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPathway {
    pub backend: String,
    pub pathway: PathwayExport,
    pub predictions: Vec<Prediction>,
    pub review: Review,
    pub timestamp: String,
}

impl StoredPathway {
    /// Reviewed summaries take precedence over generated ones.
    pub fn effective_summaries(&self) -> BTreeMap<ParentCategory, String> {
        let mut out: BTreeMap<ParentCategory, String> =
            self.pathway.pathway.iter().filter_map(|(p, e)| e.summary.clone().map(|s| (*p, s))).collect();
        out.extend(self.review.summaries.clone());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldSource {
    Adjudicated,
    Agreed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub sentence: SentenceRef,
    pub text: String,
    pub proposals: Vec<Proposal>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub seq: u64,
    pub posts: BTreeMap<String, StoredPost>,
    /// Latest proposal per annotator, per sentence.
    #[serde(with = "pairs")]
    pub proposals: BTreeMap<SentenceRef, BTreeMap<String, Proposal>>,
    #[serde(with = "pairs")]
    pub adjudications: BTreeMap<SentenceRef, Adjudication>,
    pub pathways: BTreeMap<String, StoredPathway>,
}

/// Maps keyed by [`SentenceRef`] as lists of `[key, value]` pairs, since
/// JSON object keys must be strings.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SentenceRef;

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<SentenceRef, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<SentenceRef, V>, D::Error> {
        Ok(Vec::<(SentenceRef, V)>::deserialize(d)?.into_iter().collect())
    }
}

impl State {
    pub fn sentence(&self, r: &SentenceRef) -> Result<&Sentence, ApplyError> {
        let post = self.posts.get(&r.post_id).ok_or_else(|| ApplyError::UnknownPost(r.post_id.clone()))?;
        post.sentences
            .get(r.index)
            .ok_or_else(|| ApplyError::UnknownSentence { post_id: r.post_id.clone(), index: r.index })
    }

    /// Two or more proposals that are not all the same label.
    pub fn in_conflict(&self, r: &SentenceRef) -> bool {
        let Some(props) = self.proposals.get(r) else { return false };
        let mut labels = props.values().map(|p| &p.label);
        match labels.next() {
            Some(first) => props.len() >= 2 && labels.any(|l| !l.same_as(first)),
            None => false,
        }
    }

    /// Adjudicated label, else the label every annotator (at least two) agreed on.
    pub fn gold(&self, r: &SentenceRef) -> Option<(&SentenceLabel, GoldSource)> {
        if let Some(a) = self.adjudications.get(r) {
            return Some((&a.label, GoldSource::Adjudicated));
        }
        let props = self.proposals.get(r)?;
        if props.len() >= 2 && !self.in_conflict(r) {
            props.values().next().map(|p| (&p.label, GoldSource::Agreed))
        } else {
            None
        }
    }

    pub fn disagreements(&self) -> Vec<Disagreement> {
        self.proposals
            .keys()
            .filter(|r| self.in_conflict(r) && !self.adjudications.contains_key(*r))
            .filter_map(|r| {
                let text = self.sentence(r).ok()?.text.clone();
                Some(Disagreement {
                    sentence: r.clone(),
                    text,
                    proposals: self.proposals[r].values().cloned().collect(),
                })
            })
            .collect()
    }

    /// Gold sentences, ordered by post id then index.
    pub fn gold_annotations(&self) -> Vec<AnnotatedSentence> {
        let mut refs: Vec<&SentenceRef> = self.proposals.keys().chain(self.adjudications.keys()).collect();
        refs.sort();
        refs.dedup();
        refs.into_iter()
            .filter_map(|r| {
                let (label, _) = self.gold(r)?;
                let sentence = self.sentence(r).ok()?.clone();
                Some(AnnotatedSentence { sentence, gold: label.clone() })
            })
            .collect()
    }

    pub fn gold_records(&self) -> Vec<AnnotationRecord> {
        self.gold_annotations().iter().map(|a| AnnotationRecord::from_label(&a.sentence, &a.gold)).collect()
    }

    /// (gold, predicted) pairs for every gold sentence of a post with a stored pathway.
    pub fn evaluation_pairs(&self) -> (Vec<SentenceLabel>, Vec<SentenceLabel>) {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for a in self.gold_annotations() {
            let Some(stored) = self.pathways.get(&a.sentence.post_id) else { continue };
            if let Some(p) = stored.predictions.get(a.sentence.index) {
                gold.push(a.gold);
                pred.push(p.label.clone());
            }
        }
        (gold, pred)
    }

    /// Applies one entry. Entries at or below the current sequence number are
    /// skipped, so replaying a log twice gives the same state.
    pub fn apply(&mut self, entry: &LogEntry, scheme: &CategoryScheme) -> Result<(), ApplyError> {
        if entry.seq <= self.seq {
            return Ok(());
        }
        let ts = entry.timestamp.clone();
        match &entry.record {
            Record::PostIngested { post } => {
                if post.id.trim().is_empty() || post.text.trim().is_empty() {
                    return Err(ApplyError::Invalid("post id and text must be non-empty".into()));
                }
                if let Some(existing) = self.posts.get(&post.id) {
                    if existing.post != *post {
                        return Err(ApplyError::Conflict(format!(
                            "post {:?} already exists with different content",
                            post.id
                        )));
                    }
                }
                let sentences = post.segment().sentences;
                if sentences.is_empty() {
                    return Err(ApplyError::Invalid("post has no sentences".into()));
                }
                self.posts.insert(post.id.clone(), StoredPost { post: post.clone(), sentences });
            }
            Record::AnnotationProposed { sentence, annotator_id, label } => {
                self.sentence(sentence)?;
                if annotator_id.trim().is_empty() {
                    return Err(ApplyError::Invalid("annotator_id must be non-empty".into()));
                }
                scheme.validate_label(label).map_err(ApplyError::InvalidLabel)?;
                let proposal = Proposal {
                    id: entry.seq,
                    annotator_id: annotator_id.clone(),
                    label: label.normalized(),
                    timestamp: ts,
                };
                self.proposals.entry(sentence.clone()).or_default().insert(annotator_id.clone(), proposal);
            }
            Record::Adjudicated { sentence, adjudicator_id, label, superseded } => {
                self.sentence(sentence)?;
                if self.adjudications.contains_key(sentence) {
                    return Err(ApplyError::Conflict("sentence already adjudicated".into()));
                }
                if !self.in_conflict(sentence) {
                    return Err(ApplyError::Conflict("sentence has no conflicting proposals".into()));
                }
                scheme.validate_label(label).map_err(ApplyError::InvalidLabel)?;
                self.adjudications.insert(
                    sentence.clone(),
                    Adjudication {
                        id: entry.seq,
                        adjudicator_id: adjudicator_id.clone(),
                        label: label.normalized(),
                        superseded: superseded.clone(),
                        timestamp: ts,
                    },
                );
            }
            Record::PathwayStored { backend, pathway, predictions } => {
                let post =
                    self.posts.get(&pathway.post_id).ok_or_else(|| ApplyError::UnknownPost(pathway.post_id.clone()))?;
                if predictions.len() != post.sentences.len() {
                    return Err(ApplyError::Invalid(format!(
                        "{} predictions for {} sentences",
                        predictions.len(),
                        post.sentences.len()
                    )));
                }
                for p in predictions {
                    scheme.validate_label(&p.label).map_err(ApplyError::InvalidLabel)?;
                }
                if self.pathways.get(&pathway.post_id).is_some_and(|p| p.review.approved) {
                    return Err(ApplyError::Conflict("pathway is approved and locked".into()));
                }
                self.pathways.insert(
                    pathway.post_id.clone(),
                    StoredPathway {
                        backend: backend.clone(),
                        pathway: pathway.clone(),
                        predictions: predictions.clone(),
                        review: Review::default(),
                        timestamp: ts,
                    },
                );
            }
            Record::PathwayReviewed { post_id, editor_id, summaries, approved } => {
                if !self.posts.contains_key(post_id) {
                    return Err(ApplyError::UnknownPost(post_id.clone()));
                }
                let stored = self
                    .pathways
                    .get_mut(post_id)
                    .ok_or_else(|| ApplyError::Conflict(format!("post {post_id:?} has no extracted pathway")))?;
                if stored.review.approved {
                    return Err(ApplyError::Conflict("pathway is approved and locked".into()));
                }
                if let Some(p) = summaries.keys().find(|p| !stored.pathway.pathway.contains_key(p)) {
                    return Err(ApplyError::Invalid(format!("pathway has no {} composite to summarize", p.code())));
                }
                stored.review.summaries.extend(summaries.clone());
                stored.review.approved = *approved;
                stored.review.editor_id = Some(editor_id.clone());
                stored.review.timestamp = Some(ts);
            }
        }
        self.seq = entry.seq;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
