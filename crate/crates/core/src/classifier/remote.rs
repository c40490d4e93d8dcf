use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ClassifierBackend, RawPrediction};
use crate::backend::{join_url, BackendError, HttpClient, HttpError};
use crate::corpus::Sentence;
use crate::taxonomy::{CategoryScheme, RawLabelEntry};

/// Body of `POST /classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub scheme_version: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePrediction {
    pub labels: Vec<RawLabelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    /// Echoed by servers that check it; must match the request when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_version: Option<String>,
    pub predictions: Vec<WirePrediction>,
}

/// Client for a classification model served over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    url: String,
    http: HttpClient,
}

impl RemoteClassifier {
    pub fn new(endpoint_url: &str, auth_token: Option<String>) -> Self {
        Self::with_timeout(endpoint_url, auth_token, Duration::from_secs(60))
    }

    pub fn with_timeout(endpoint_url: &str, auth_token: Option<String>, timeout: Duration) -> Self {
        Self { url: join_url(endpoint_url, "classify"), http: HttpClient::new(timeout, auth_token) }
    }

    fn call(&self, body: &ClassifyRequest) -> Result<ClassifyResponse, HttpError> {
        match self.http.post_json(&self.url, body) {
            Err(e) if e.is_transient() => self.http.post_json(&self.url, body),
            other => other,
        }
    }
}

impl ClassifierBackend for RemoteClassifier {
    fn name(&self) -> &str {
        "remote"
    }

    fn classify(&self, sentences: &[Sentence], scheme: &CategoryScheme) -> Result<Vec<RawPrediction>, BackendError> {
        let body = ClassifyRequest {
            scheme_version: scheme.version().to_string(),
            sentences: sentences.iter().map(|s| s.text.clone()).collect(),
        };
        let response = self.call(&body).map_err(HttpError::into_backend_error)?;
        if let Some(v) = &response.scheme_version {
            if v != scheme.version() {
                return Err(BackendError::Protocol(format!(
                    "scheme version mismatch: sent {}, server uses {v}",
                    scheme.version()
                )));
            }
        }
        if response.predictions.len() != sentences.len() {
            return Err(BackendError::Protocol(format!(
                "{} predictions for {} sentences",
                response.predictions.len(),
                sentences.len()
            )));
        }
        Ok(response
            .predictions
            .into_iter()
            .enumerate()
            .map(|(i, p)| RawPrediction {
                labels: p.labels,
                confidence: p.confidence,
                payload: Some(format!("{}#{i}", self.url)),
            })
            .collect())
    }
}
