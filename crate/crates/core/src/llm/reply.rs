use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::taxonomy::{
    Category, CategoryScheme, LabelViolation, ParentCategory, RawLabelEntry, Resolution, SentenceLabel,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplyError {
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("sentence {0} has no label entry")]
    MissingIndex(usize),
    #[error("unknown category {value:?} in {}", location(.index))]
    UnknownCategory { index: Option<usize>, value: String },
    #[error("sentence {index}: {detail}")]
    HierarchyViolation { index: usize, detail: String },
}

fn location(index: &Option<usize>) -> String {
    index.map_or("summaries".to_string(), |i| format!("sentence {i}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedExtraction {
    pub labels: Vec<SentenceLabel>,
    pub summaries: BTreeMap<ParentCategory, String>,
    pub raw_reply: String,
}

/// The outermost `{...}` span, which drops code fences and surrounding prose.
fn json_span(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}

fn as_entries(index: usize, v: &Value) -> Result<Vec<RawLabelEntry>, ReplyError> {
    serde_json::from_value(v.clone()).map_err(|e| ReplyError::Malformed(format!("labels for sentence {index}: {e}")))
}

fn resolve(index: usize, raw: &[RawLabelEntry], scheme: &CategoryScheme) -> Result<SentenceLabel, ReplyError> {
    match scheme.resolve_label(raw, Resolution::Normalize) {
        Ok(l) => Ok(l.normalized()),
        Err(violations) => Err(match violations.into_iter().next().expect("non-empty violations") {
            LabelViolation::UnknownParent { value } | LabelViolation::UnknownChild { value } => {
                ReplyError::UnknownCategory { index: Some(index), value }
            }
            other => ReplyError::HierarchyViolation { index, detail: other.to_string() },
        }),
    }
}

/// Parses a model reply. `expected_sentences` is the number of numbered
/// sentences in the prompt; every index must be labelled and no other may
/// appear. With zero expected sentences a "labels" object is optional.
pub fn parse_reply(
    raw: &str,
    scheme: &CategoryScheme,
    expected_sentences: usize,
) -> Result<ParsedExtraction, ReplyError> {
    let span = json_span(raw).ok_or_else(|| ReplyError::Malformed("no JSON object found".into()))?;
    let root: Map<String, Value> = serde_json::from_str(span).map_err(|e| ReplyError::Malformed(e.to_string()))?;

    let mut labels = vec![None; expected_sentences];
    match root.get("labels") {
        Some(Value::Object(map)) => {
            for (key, value) in map {
                let index: usize = key
                    .trim()
                    .parse()
                    .map_err(|_| ReplyError::Malformed(format!("label key {key:?} is not a sentence index")))?;
                if index >= expected_sentences {
                    return Err(ReplyError::Malformed(format!("label for unknown sentence {index}")));
                }
                labels[index] = Some(resolve(index, &as_entries(index, value)?, scheme)?);
            }
        }
        Some(_) => return Err(ReplyError::Malformed("\"labels\" must be an object".into())),
        None if expected_sentences > 0 => return Err(ReplyError::Malformed("missing \"labels\"".into())),
        None => {}
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(ReplyError::MissingIndex(i)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summaries = BTreeMap::new();
    match root.get("summaries") {
        Some(Value::Object(map)) => {
            for (key, value) in map {
                let parent = match scheme.normalize(key) {
                    Ok(Category::Parent(p)) => p,
                    _ => return Err(ReplyError::UnknownCategory { index: None, value: key.clone() }),
                };
                let text = value
                    .as_str()
                    .ok_or_else(|| ReplyError::Malformed(format!("summary for {key} is not a string")))?;
                summaries.insert(parent, text.trim().to_string());
            }
        }
        Some(Value::Null) | None => {}
        Some(_) => return Err(ReplyError::Malformed("\"summaries\" must be an object".into())),
    }

    Ok(ParsedExtraction { labels, summaries, raw_reply: raw.to_string() })
}

/// Renders a well-formed reply in the shape the prompts ask for.
pub fn render_reply(labels: &[SentenceLabel], summaries: &BTreeMap<ParentCategory, String>) -> String {
    let mut root = Map::new();
    if !labels.is_empty() {
        let entries: Map<String, Value> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let list: Vec<Value> = l
                    .entries()
                    .iter()
                    .map(|e| {
                        json!({
                            "parent": e.parent.code(),
                            "children": e.children.iter().map(|c| c.display_name()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                (i.to_string(), Value::Array(list))
            })
            .collect();
        root.insert("labels".into(), Value::Object(entries));
    }
    if !summaries.is_empty() {
        let s: Map<String, Value> =
            summaries.iter().map(|(p, t)| (p.code().to_string(), Value::String(t.clone()))).collect();
        root.insert("summaries".into(), Value::Object(s));
    }
    Value::Object(root).to_string()
}
