use std::collections::HashMap;

use super::{ClassifierBackend, RawPrediction};
use crate::backend::BackendError;
use crate::corpus::{AnnotatedSentence, Sentence};
use crate::taxonomy::{CategoryScheme, SentenceLabel};

/// Deterministic fixture lookup. A sentence is matched by position
/// (`post_id`, `index`) first, then by trimmed text; misses get the default
/// label, which is empty unless configured otherwise.
#[derive(Debug, Clone, Default)]
pub struct MockClassifier {
    by_position: HashMap<(String, usize), SentenceLabel>,
    by_text: HashMap<String, SentenceLabel>,
    default: SentenceLabel,
}

impl MockClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Gold-echo backend: answers every annotated sentence with its gold label.
    pub fn from_annotations<'a>(annotations: impl IntoIterator<Item = &'a AnnotatedSentence>) -> Self {
        let mut mock = Self::new();
        for a in annotations {
            mock = mock
                .with_position(&a.sentence.post_id, a.sentence.index, a.gold.clone())
                .with_text(&a.sentence.text, a.gold.clone());
        }
        mock
    }

    pub fn with_text(mut self, text: &str, label: SentenceLabel) -> Self {
        self.by_text.insert(text.trim().to_string(), label);
        self
    }

    pub fn with_position(mut self, post_id: &str, index: usize, label: SentenceLabel) -> Self {
        self.by_position.insert((post_id.to_string(), index), label);
        self
    }

    pub fn with_default(mut self, label: SentenceLabel) -> Self {
        self.default = label;
        self
    }

    pub fn lookup(&self, sentence: &Sentence) -> (&SentenceLabel, &'static str) {
        if let Some(l) = self.by_position.get(&(sentence.post_id.clone(), sentence.index)) {
            (l, "fixture:position")
        } else if let Some(l) = self.by_text.get(sentence.text.trim()) {
            (l, "fixture:text")
        } else {
            (&self.default, "fixture:default")
        }
    }
}

impl ClassifierBackend for MockClassifier {
    fn name(&self) -> &str {
        "mock"
    }

    fn classify(&self, sentences: &[Sentence], _scheme: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
        Ok(sentences
            .iter()
            .map(|s| {
                let (label, hit) = self.lookup(s);
                RawPrediction { payload: Some(hit.to_string()), ..RawPrediction::from_label(label) }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{ChildCategory, ParentCategory};

    fn sentence(post: &str, index: usize, text: &str) -> Sentence {
        Sentence { post_id: post.into(), index, text: text.into() }
    }

    #[test]
    fn hit_miss_and_determinism() {
        let label = SentenceLabel::empty().with(ParentCategory::ActivatingEvent, [ChildCategory::SocialRelation]);
        let mock = MockClassifier::new().with_text("my mother abused me", label.clone());
        let scheme = CategoryScheme::canonical();
        let input = vec![sentence("p", 0, " my mother abused me "), sentence("p", 1, "unrelated")];
        let first = mock.classify(&input, &scheme).unwrap();
        assert_eq!(first[0].labels, label.to_raw());
        assert!(first[1].labels.is_empty());
        assert_eq!(mock.classify(&input, &scheme).unwrap(), first);
    }

    #[test]
    fn position_beats_text() {
        let a = SentenceLabel::empty().with(ParentCategory::Belief, []);
        let b = SentenceLabel::empty().with(ParentCategory::Consequence, []);
        let mock = MockClassifier::new().with_text("same", a).with_position("p", 3, b.clone());
        assert_eq!(mock.lookup(&sentence("p", 3, "same")).0, &b);
        assert_eq!(mock.lookup(&sentence("q", 3, "same")).0.parents(), [ParentCategory::Belief].into());
    }
}
