//! Chat-completion gateway: prompt rendering, HTTP calls with a retry
//! budget, and strict parsing of JSON replies.

mod prompt;
mod reply;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, HttpClient, HttpError};
use crate::classifier::{ClassifierBackend, RawPrediction};
use crate::corpus::{Language, Sentence};
use crate::pathway::{CompositeSentence, SummarizerBackend};
use crate::taxonomy::{CategoryScheme, ParentCategory};

pub use prompt::{build_prompt, PromptError, PromptMode, PromptTemplate};
pub use reply::{parse_reply, render_reply, ParsedExtraction, ReplyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Full URL of the chat-completion endpoint.
    pub endpoint_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token; unset means no auth.
    pub api_key_env: Option<String>,
    pub max_concurrency: usize,
    pub language: Language,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            temperature: 0.7,
            max_retries: 2,
            timeout_secs: 120,
            api_key_env: Some("OPENAI_API_KEY".into()),
            max_concurrency: 4,
            language: Language::En,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_concurrency == 0 {
            return Err(LlmError::Config("max_concurrency must be positive".into()));
        }
        if self.endpoint_url.trim().is_empty() {
            return Err(LlmError::Config("endpoint_url is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid LLM configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("LLM backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error(transparent)]
    Reply(#[from] ReplyError),
}

impl From<LlmError> for BackendError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::BackendUnavailable(m) => BackendError::Unavailable(m),
            LlmError::Reply(r) => BackendError::Protocol(r.to_string()),
            other => BackendError::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ChatReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Thread-safe chat-completion client.
#[derive(Debug)]
pub struct LlmClient {
    config: LlmConfig,
    template: PromptTemplate,
    http: HttpClient,
    limiter: Limiter,
    requests: AtomicUsize,
}

impl LlmClient {
    /// Uses the bundled template for the configured language.
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        let template = PromptTemplate::builtin(config.language);
        Self::with_template(config, template)
    }

    pub fn with_template(config: LlmConfig, template: PromptTemplate) -> Result<Self, LlmError> {
        config.validate()?;
        let token = config.api_key_env.as_deref().and_then(|name| std::env::var(name).ok());
        let http = HttpClient::new(Duration::from_secs(config.timeout_secs), token);
        let limiter = Limiter { free: Mutex::new(config.max_concurrency), cv: Condvar::new() };
        Ok(Self { config, template, http, limiter, requests: AtomicUsize::new(0) })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    /// Number of HTTP requests sent so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn prompt<S: AsRef<str>>(
        &self,
        scheme: &CategoryScheme,
        inputs: &[S],
        mode: PromptMode,
    ) -> Result<String, LlmError> {
        Ok(self.template.render(scheme, inputs, mode)?)
    }

    fn call(&self, prompt: &str) -> Result<String, HttpError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage { role: "user", content: prompt }],
            temperature: self.config.temperature,
        };
        let _slot = self.limiter.acquire();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let response: ChatResponse = self.http.post_json(&self.config.endpoint_url, &body)?;
        response
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| HttpError::Decode("reply has no choices[0].message.content".into()))
    }

    /// One chat-completion call; returns the reply text.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.call(prompt).map_err(|e| match e {
            HttpError::Decode(m) => LlmError::Reply(ReplyError::Malformed(m)),
            other => LlmError::BackendUnavailable(other.to_string()),
        })
    }

    /// Calls and parses, re-sending the same prompt after a transport
    /// failure or an unparseable reply, up to `max_retries` extra attempts.
    /// The last cause is returned when the budget runs out.
    pub fn complete_parsed<T>(
        &self,
        prompt: &str,
        parse: impl Fn(&str) -> Result<T, ReplyError>,
    ) -> Result<T, LlmError> {
        let mut last = None;
        for _ in 0..=self.config.max_retries {
            match self.call(prompt) {
                Ok(text) => match parse(&text) {
                    Ok(v) => return Ok(v),
                    Err(e) => last = Some(LlmError::Reply(e)),
                },
                Err(HttpError::Decode(m)) => last = Some(LlmError::Reply(ReplyError::Malformed(m))),
                Err(e) if e.is_transient() => last = Some(LlmError::BackendUnavailable(e.to_string())),
                Err(e) => return Err(LlmError::BackendUnavailable(e.to_string())),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Labels `sentences` and summarizes each labelled parent in one call.
    pub fn extract(&self, sentences: &[Sentence], scheme: &CategoryScheme) -> Result<ParsedExtraction, LlmError> {
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        let prompt = self.prompt(scheme, &texts, PromptMode::Both)?;
        self.complete_parsed(&prompt, |raw| parse_reply(raw, scheme, texts.len()))
    }

    pub fn classify_texts(&self, texts: &[&str], scheme: &CategoryScheme) -> Result<ParsedExtraction, LlmError> {
        let prompt = self.prompt(scheme, texts, PromptMode::Classify)?;
        self.complete_parsed(&prompt, |raw| parse_reply(raw, scheme, texts.len()))
    }

    pub fn summarize(&self, parent: ParentCategory, text: &str, scheme: &CategoryScheme) -> Result<String, LlmError> {
        let prompt = self.prompt(scheme, &[text], PromptMode::Summarize(parent))?;
        self.complete_parsed(&prompt, |raw| {
            let mut parsed = parse_reply(raw, scheme, 0)?;
            parsed
                .summaries
                .remove(&parent)
                .ok_or_else(|| ReplyError::Malformed(format!("no summary for {}", parent.code())))
        })
    }
}

/// Classifier backend that prompts a chat model.
#[derive(Debug, Clone)]
pub struct LlmClassifier {
    client: Arc<LlmClient>,
}

impl LlmClassifier {
    pub fn new(client: Arc<LlmClient>) -> Self {
        Self { client }
    }
}

impl ClassifierBackend for LlmClassifier {
    fn name(&self) -> &str {
        "llm"
    }

    fn classify(&self, sentences: &[Sentence], scheme: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        let parsed = self.client.classify_texts(&texts, scheme)?;
        Ok(parsed
            .labels
            .iter()
            .map(|l| RawPrediction { payload: Some(parsed.raw_reply.clone()), ..RawPrediction::from_label(l) })
            .collect())
    }
}

/// Summarizer backend that prompts a chat model once per parent.
#[derive(Debug, Clone)]
pub struct LlmSummarizer {
    client: Arc<LlmClient>,
    scheme: CategoryScheme,
}

impl LlmSummarizer {
    pub fn new(client: Arc<LlmClient>, scheme: CategoryScheme) -> Self {
        Self { client, scheme }
    }
}

impl SummarizerBackend for LlmSummarizer {
    fn name(&self) -> &str {
        "llm"
    }

    fn summarize(&self, composite: &CompositeSentence) -> Result<String, BackendError> {
        Ok(self.client.summarize(composite.parent, &composite.text, &self.scheme)?)
    }
}
