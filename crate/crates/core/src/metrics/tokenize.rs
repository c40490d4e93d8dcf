use serde::{Deserialize, Serialize};

use crate::corpus::Language;

/// How text is split into tokens before n-gram matching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// One token per letter or digit; whitespace and punctuation dropped.
    Chars,
    /// Lowercased words; CJK ideographs still count as one token each.
    Words,
    /// `Chars` if the text contains any CJK ideograph, otherwise `Words`.
    #[default]
    Auto,
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF | 0x2A700..=0x2EBEF)
}

impl Tokenizer {
    pub fn for_language(language: Language) -> Self {
        match language {
            Language::Zh => Tokenizer::Chars,
            Language::En => Tokenizer::Words,
        }
    }

    pub fn resolve(self, text: &str) -> Self {
        match self {
            Tokenizer::Auto if text.chars().any(is_cjk) => Tokenizer::Chars,
            Tokenizer::Auto => Tokenizer::Words,
            t => t,
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self.resolve(text) {
            Tokenizer::Chars => text.chars().filter(|c| c.is_alphanumeric()).map(String::from).collect(),
            _ => words(text),
        }
    }
}

fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        let w = cur.trim_matches('\'');
        if !w.is_empty() {
            out.push(w.to_string());
        }
        cur.clear();
    };
    for c in text.chars() {
        if is_cjk(c) {
            flush(&mut cur, &mut out);
            out.push(c.to_string());
        } else if c.is_alphanumeric() || c == '\'' {
            cur.extend(c.to_lowercase());
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}
