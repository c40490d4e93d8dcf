//! Error type shared by classifier and summarizer backends, and the small
//! blocking JSON-over-HTTP client they use.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Transport failure or a non-2xx status after retries.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    /// The backend answered, but not in the agreed shape.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// The backend rejected this particular input.
    #[error("backend failed: {0}")]
    Failed(String),
}

#[derive(Debug, Error)]
pub(crate) enum HttpError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("undecodable response: {0}")]
    Decode(String),
}

impl HttpError {
    /// Worth one more attempt: connection problems, 5xx and 429.
    pub(crate) fn is_transient(&self) -> bool {
        match self {
            HttpError::Transport(_) => true,
            HttpError::Status { status, .. } => *status >= 500 || *status == 429,
            HttpError::Decode(_) => false,
        }
    }

    pub(crate) fn into_backend_error(self) -> BackendError {
        match self {
            HttpError::Decode(msg) => BackendError::Protocol(msg),
            other => BackendError::Unavailable(other.to_string()),
        }
    }
}

#[derive(Clone)]
pub(crate) struct HttpClient {
    agent: ureq::Agent,
    bearer: Option<String>,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient").field("auth", &self.bearer.is_some()).finish()
    }
}

impl HttpClient {
    pub(crate) fn new(timeout: Duration, bearer: Option<String>) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { agent, bearer }
    }

    pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R, HttpError> {
        let text = self.post_json_text(url, body)?;
        serde_json::from_str(&text).map_err(|e| HttpError::Decode(e.to_string()))
    }

    pub(crate) fn post_json_text<B: Serialize>(&self, url: &str, body: &B) -> Result<String, HttpError> {
        let mut request = self.agent.post(url).header("Accept", "application/json");
        if let Some(token) = &self.bearer {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send_json(body).map_err(|e| HttpError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| HttpError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(HttpError::Status { status, body: text });
        }
        Ok(text)
    }
}

/// Joins a base URL and a path without doubling the slash.
pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}
