use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::Language;
use crate::taxonomy::{CategoryScheme, ParentCategory};

const EN: &str = include_str!("../../templates/prompt_en.toml");
const ZH: &str = include_str!("../../templates/prompt_zh.toml");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("invalid prompt template: {0}")]
    Template(String),
    #[error("cannot read prompt template: {0}")]
    Io(#[from] std::io::Error),
    #[error("no sentences to classify")]
    NoSentences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    /// Label each sentence.
    Classify,
    /// Summarize one parent's composite sentence.
    Summarize(ParentCategory),
    /// Label, then summarize per parent.
    Both,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Headers {
    pub role: String,
    pub task: String,
    pub structure: String,
    pub output: String,
    pub statement: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PerMode {
    pub classify: String,
    pub summarize: String,
    pub both: String,
}

impl PerMode {
    fn get(&self, mode: PromptMode) -> &str {
        match mode {
            PromptMode::Classify => &self.classify,
            PromptMode::Summarize(_) => &self.summarize,
            PromptMode::Both => &self.both,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Structure {
    pub intro: String,
    pub parents: BTreeMap<String, String>,
    pub children: BTreeMap<String, String>,
}

/// Versioned prompt text. Category definitions are keyed by parent code and
/// child id.
#[derive(Debug, Clone, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub language: Language,
    pub role: String,
    pub headers: Headers,
    pub task: PerMode,
    pub structure: Structure,
    pub output: PerMode,
}

impl PromptTemplate {
    pub fn builtin(language: Language) -> Self {
        let text = match language {
            Language::En => EN,
            Language::Zh => ZH,
        };
        Self::from_toml(text).expect("bundled template is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        let t: Self = toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), PromptError> {
        let texts = [
            &self.role,
            &self.headers.role,
            &self.headers.task,
            &self.headers.structure,
            &self.headers.output,
            &self.headers.statement,
            &self.task.classify,
            &self.task.summarize,
            &self.task.both,
            &self.structure.intro,
            &self.output.classify,
            &self.output.summarize,
            &self.output.both,
        ];
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(PromptError::Template("every section must be non-empty".into()));
        }
        if texts.iter().any(|t| t.lines().any(|l| l.starts_with("## "))) {
            return Err(PromptError::Template("section text must not contain '## ' headings".into()));
        }
        for p in ParentCategory::ALL {
            if !self.structure.parents.contains_key(p.code()) {
                return Err(PromptError::Template(format!("no definition for parent {}", p.code())));
            }
            for c in p.children() {
                if !self.structure.children.contains_key(c.id()) {
                    return Err(PromptError::Template(format!("no definition for child {}", c.id())));
                }
            }
        }
        Ok(())
    }

    pub fn header(&self, name: &str) -> String {
        format!("## {name}")
    }

    fn structure_text(&self, scheme: &CategoryScheme) -> String {
        let mut out = format!("{}\n", self.structure.intro.trim());
        for &p in scheme.parents() {
            let _ = writeln!(out, "\n{}: {}", p.table_label(), self.structure.parents[p.code()].trim());
            for c in scheme.children_of(p) {
                let _ = writeln!(out, "  - {}: {}", c.display_name(), self.structure.children[c.id()].trim());
            }
        }
        out
    }

    /// Renders the four sections followed by the numbered input. The result
    /// depends only on the template, scheme, inputs and mode.
    pub fn render<S: AsRef<str>>(
        &self,
        scheme: &CategoryScheme,
        sentences: &[S],
        mode: PromptMode,
    ) -> Result<String, PromptError> {
        if sentences.is_empty() && !matches!(mode, PromptMode::Summarize(_)) {
            return Err(PromptError::NoSentences);
        }
        let fill = |text: &str| match mode {
            PromptMode::Summarize(p) => text.replace("{parent_code}", p.code()).replace("{parent}", &p.table_label()),
            _ => text.to_string(),
        };
        let mut out = String::new();
        let section = |out: &mut String, name: &str, body: &str| {
            let _ = write!(out, "{}\n{}\n\n", self.header(name), body.trim());
        };
        section(&mut out, &self.headers.role, &self.role);
        section(&mut out, &self.headers.task, &fill(self.task.get(mode)));
        section(&mut out, &self.headers.structure, &self.structure_text(scheme));
        section(&mut out, &self.headers.output, &fill(self.output.get(mode)));
        let _ = writeln!(out, "{}", self.header(&self.headers.statement));
        for (i, s) in sentences.iter().enumerate() {
            let _ = writeln!(out, "[{i}] {}", s.as_ref().trim());
        }
        Ok(out)
    }
}

/// Prompt with the bundled template for `language`.
pub fn build_prompt<S: AsRef<str>>(
    scheme: &CategoryScheme,
    sentences: &[S],
    mode: PromptMode,
    language: Language,
) -> Result<String, PromptError> {
    PromptTemplate::builtin(language).render(scheme, sentences, mode)
}
