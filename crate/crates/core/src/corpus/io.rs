//! Line-delimited JSON corpus files.
//!
//! Each line is one of three record kinds, told apart by their fields:
//!
//! ```text
//! {"id": "p1", "source": "weibo", "language": "zh", "text": "..."}
//! {"post_id": "p1", "index": 0, "text": "...", "labels": [{"parent": "B", "children": ["jumping_to_conclusions"]}]}
//! {"post_id": "p1", "parent": "B", "source_text": "...", "reference_summary": "..."}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotatedSentence, Corpus, CorpusError, Post, Sentence, SummaryPair};
use crate::taxonomy::{CategoryScheme, ParentCategory, RawLabelEntry, Resolution, SentenceLabel};

pub type PostRecord = Post;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub post_id: String,
    pub index: usize,
    pub text: String,
    pub labels: Vec<RawLabelEntry>,
}

impl AnnotationRecord {
    pub fn from_label(sentence: &Sentence, label: &SentenceLabel) -> Self {
        Self {
            post_id: sentence.post_id.clone(),
            index: sentence.index,
            text: sentence.text.clone(),
            labels: label.to_raw(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryPairRecord {
    pub post_id: String,
    pub parent: String,
    pub source_text: String,
    pub reference_summary: String,
}

impl From<&SummaryPair> for SummaryPairRecord {
    fn from(p: &SummaryPair) -> Self {
        Self {
            post_id: p.post_id.clone(),
            parent: p.parent.code().to_string(),
            source_text: p.source_text.clone(),
            reference_summary: p.reference_summary.clone(),
        }
    }
}

enum Record {
    Post(Post),
    Annotation(AnnotationRecord),
    SummaryPair(SummaryPairRecord),
}

fn classify_line(value: Value) -> Result<Record, String> {
    let obj = value.as_object().ok_or("expected a JSON object")?;
    let parsed = if obj.contains_key("labels") {
        serde_json::from_value(value).map(Record::Annotation)
    } else if obj.contains_key("reference_summary") {
        serde_json::from_value(value).map(Record::SummaryPair)
    } else if obj.contains_key("id") {
        serde_json::from_value(value).map(Record::Post)
    } else {
        return Err("record is neither a post, an annotation nor a summary pair".into());
    };
    parsed.map_err(|e| e.to_string())
}

pub fn read_corpus<R: Read>(reader: R, scheme: &CategoryScheme) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut post_ids = HashSet::new();
    let mut sentence_keys = HashSet::new();

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse { line: line_no, message };
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        match classify_line(value).map_err(parse_err)? {
            Record::Post(post) => {
                if post.text.trim().is_empty() {
                    return Err(parse_err(format!("post {:?} has empty text", post.id)));
                }
                if !post_ids.insert(post.id.clone()) {
                    return Err(parse_err(format!("duplicate post id {:?}", post.id)));
                }
                corpus.posts.push(post);
            }
            Record::Annotation(rec) => {
                let sentence = Sentence { post_id: rec.post_id, index: rec.index, text: rec.text };
                if sentence.text.trim().is_empty() {
                    return Err(parse_err(format!("sentence {} has empty text", sentence.key())));
                }
                if !sentence_keys.insert(sentence.key()) {
                    return Err(parse_err(format!("duplicate sentence {}", sentence.key())));
                }
                let gold = scheme
                    .resolve_label(&rec.labels, Resolution::Exact)
                    .map_err(|violations| CorpusError::Label { sentence: sentence.key(), violations })?;
                corpus.annotations.push(AnnotatedSentence { sentence, gold });
            }
            Record::SummaryPair(rec) => {
                let parent = ParentCategory::from_code(&rec.parent)
                    .ok_or_else(|| parse_err(format!("unknown parent {:?}", rec.parent)))?;
                if rec.source_text.trim().is_empty() || rec.reference_summary.trim().is_empty() {
                    return Err(parse_err("summary pair with empty text".into()));
                }
                corpus.summary_pairs.push(SummaryPair {
                    post_id: rec.post_id,
                    parent,
                    source_text: rec.source_text,
                    reference_summary: rec.reference_summary,
                });
            }
        }
    }
    Ok(corpus)
}

fn write_line<W: Write, T: Serialize>(w: &mut W, record: &T) -> Result<(), CorpusError> {
    serde_json::to_writer(&mut *w, record).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes posts, then annotations, then summary pairs, one JSON object per line.
pub fn write_corpus<W: Write>(writer: W, corpus: &Corpus) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(writer);
    for post in &corpus.posts {
        write_line(&mut w, post)?;
    }
    for a in &corpus.annotations {
        write_line(&mut w, &AnnotationRecord::from_label(&a.sentence, &a.gold))?;
    }
    for p in &corpus.summary_pairs {
        write_line(&mut w, &SummaryPairRecord::from(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>, scheme: &CategoryScheme) -> Result<Corpus, CorpusError> {
    read_corpus(File::open(path)?, scheme)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_corpus(File::create(path)?, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Source};
    use crate::taxonomy::{ChildCategory, ParentCategory};

    fn scheme() -> CategoryScheme {
        CategoryScheme::canonical()
    }

    #[test]
    fn reads_three_posts() {
        let data = r#"{"id":"a","source":"weibo","language":"zh","text":"我很累。"}
{"id":"b","source":"reddit","language":"en","text":"I am tired."}

{"id":"c","source":"other","language":"en","text":"Fine."}
"#;
        let corpus = read_corpus(data.as_bytes(), &scheme()).unwrap();
        assert_eq!(corpus.posts.len(), 3);
        assert_eq!(corpus.posts[1].source, Source::Reddit);
        assert_eq!(corpus.posts[0].language, Language::Zh);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let data = "{\"id\":\"a\",\"source\":\"weibo\",\"language\":\"zh\",\"text\":\"x\"}\n{not json\n";
        match read_corpus(data.as_bytes(), &scheme()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn child_under_wrong_parent_is_a_label_error() {
        let data =
            r#"{"post_id":"p","index":3,"text":"I cried.","labels":[{"parent":"A","children":["emotional_effect"]}]}"#;
        match read_corpus(data.as_bytes(), &scheme()) {
            Err(CorpusError::Label { sentence, violations }) => {
                assert_eq!(sentence, "p#3");
                assert_eq!(violations.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_post_rejected() {
        let line = r#"{"id":"a","source":"weibo","language":"zh","text":"x"}"#;
        let data = format!("{line}\n{line}\n");
        assert!(matches!(read_corpus(data.as_bytes(), &scheme()), Err(CorpusError::Parse { line: 2, .. })));
    }

    #[test]
    fn save_then_load_is_identity() {
        let corpus = Corpus {
            posts: vec![Post::new("p", Source::Weibo, Language::Zh, "我很累。我想消失。")],
            annotations: vec![
                AnnotatedSentence {
                    sentence: Sentence { post_id: "p".into(), index: 0, text: "我很累。".into() },
                    gold: SentenceLabel::empty().with(ParentCategory::Consequence, [ChildCategory::EmotionalEffect]),
                },
                AnnotatedSentence {
                    sentence: Sentence { post_id: "p".into(), index: 1, text: "我想消失。".into() },
                    gold: SentenceLabel::empty(),
                },
            ],
            summary_pairs: vec![SummaryPair {
                post_id: "p".into(),
                parent: ParentCategory::Consequence,
                source_text: "我很累。".into(),
                reference_summary: "疲惫".into(),
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        assert_eq!(load_corpus(&path, &scheme()).unwrap(), corpus);
    }
}
