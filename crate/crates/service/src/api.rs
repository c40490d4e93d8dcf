use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State as Extract};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cogpath_core::classifier::{ClassifierBackend, ClassifyError, MockClassifier, RemoteClassifier};
use cogpath_core::corpus::{Language, Post, Source};
use cogpath_core::llm::{LlmClassifier, LlmSummarizer};
use cogpath_core::metrics::classification_report;
use cogpath_core::pathway::{
    extract_pathway, IdentitySummarizer, PathwayConfig, PathwayError, PathwayExport, PipelineError, RemoteSummarizer,
    SummarizerBackend,
};
use cogpath_core::{LabelViolation, ParentCategory, RawLabelEntry, Resolution, SentenceLabel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::state::{ApplyError, LogEntry, Record, SentenceRef, State, StoredPathway};
use crate::AppState;

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), details: None }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn violations(violations: Vec<LabelViolation>) -> Self {
        Self {
            details: Some(json!({ "violations": violations })),
            ..Self::new(StatusCode::BAD_REQUEST, "invalid_label", "label violates the category scheme")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(d) = self.details {
            body["details"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r {
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, "invalid_request", r.body_text())
    }
}

impl From<ApplyError> for ApiError {
    fn from(e: ApplyError) -> Self {
        match e {
            ApplyError::UnknownPost(_) | ApplyError::UnknownSentence { .. } => Self::not_found(e.to_string()),
            ApplyError::InvalidLabel(v) => Self::violations(v),
            ApplyError::Invalid(m) => Self::bad_request(m),
            ApplyError::Conflict(m) => Self::new(StatusCode::CONFLICT, "conflict", m),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match &e {
            _ if e.is_backend_unavailable() => Self::unavailable(e.to_string()),
            PipelineError::Classification(ClassifyError::InvalidBatchSize) => Self::internal(e.to_string()),
            PipelineError::Pathway(PathwayError::ContractViolation(_)) => Self::internal(e.to_string()),
            _ => Self::new(StatusCode::BAD_GATEWAY, "backend_error", e.to_string()),
        }
    }
}

/// JSON body extractor whose rejections use the service error shape.
pub(crate) struct ApiJson<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await?;
        Ok(Self(v))
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(app: AppState) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/scheme", get(scheme))
        .route("/posts", post(ingest).get(list_posts))
        .route("/posts/{id}", get(get_post))
        .route("/extract", post(extract))
        .route("/pathways/{id}", get(get_pathway))
        .route("/pathways/{id}/review", put(review))
        .route("/annotations", put(propose))
        .route("/adjudications", post(adjudicate))
        .route("/disagreements", get(disagreements))
        .route("/export/gold", get(export_gold))
        .route("/reports/classification", get(report))
        .layer(middleware::from_fn_with_state(app.clone(), auth));
    let mut router = Router::new().nest("/v1", v1).with_state(app.clone());
    if let Some(cors) = cors_layer(&app.config().cors_origins) {
        router = router.layer(cors);
    }
    router
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST, Method::PUT, Method::OPTIONS])
            .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
    )
}

async fn auth(Extract(app): Extract<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.config().auth_token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

impl AppState {
    /// Validates `record` against the current state, appends it, then
    /// publishes the new snapshot. Writers are serialized by the store lock.
    pub(crate) async fn commit(&self, record: Record) -> ApiResult<Arc<State>> {
        let mut store = self.inner.writer.lock().await;
        let current = self.snapshot();
        let entry = LogEntry { seq: current.seq + 1, timestamp: chrono::Utc::now().to_rfc3339(), record };
        let mut next = (*current).clone();
        next.apply(&entry, &self.inner.scheme)?;
        store.append(&entry).map_err(|e| ApiError::internal(e.to_string()))?;
        let next = Arc::new(next);
        *self.inner.snapshot.write().unwrap() = Arc::clone(&next);
        Ok(next)
    }

    fn resolve(&self, labels: &[RawLabelEntry]) -> ApiResult<SentenceLabel> {
        self.inner.scheme.resolve_label(labels, Resolution::Exact).map_err(ApiError::violations)
    }
}

async fn health(Extract(app): Extract<AppState>) -> Json<Value> {
    let s = app.snapshot();
    Json(json!({ "status": "ok", "seq": s.seq, "state_hash": s.hash() }))
}

async fn scheme(Extract(app): Extract<AppState>) -> Json<Value> {
    Json(serde_json::to_value(app.inner.scheme.to_document()).unwrap_or(Value::Null))
}

#[derive(Debug, Deserialize)]
struct IngestRequest {
    id: String,
    #[serde(default = "default_source")]
    source: Source,
    language: Language,
    text: String,
}

fn default_source() -> Source {
    Source::Other
}

fn post_view(s: &State, id: &str) -> ApiResult<Value> {
    let stored = s.posts.get(id).ok_or_else(|| ApiError::not_found(format!("unknown post {id:?}")))?;
    let sentences: Vec<Value> = stored
        .sentences
        .iter()
        .map(|sentence| {
            let r = SentenceRef { post_id: id.to_string(), index: sentence.index };
            let proposals: Vec<_> = s.proposals.get(&r).map(|m| m.values().cloned().collect()).unwrap_or_default();
            let gold = s.gold(&r).map(|(label, source)| json!({ "label": label, "source": source }));
            json!({
                "index": sentence.index,
                "text": sentence.text,
                "proposals": proposals,
                "gold": gold,
                "in_conflict": s.in_conflict(&r) && !s.adjudications.contains_key(&r),
            })
        })
        .collect();
    Ok(json!({
        "post": stored.post,
        "sentences": sentences,
        "has_pathway": s.pathways.contains_key(id),
    }))
}

async fn ingest(Extract(app): Extract<AppState>, ApiJson(req): ApiJson<IngestRequest>) -> ApiResult<Response> {
    let post = Post::new(req.id, req.source, req.language, req.text);
    if app.snapshot().posts.get(&post.id).is_some_and(|p| p.post == post) {
        return Ok((StatusCode::OK, Json(post_view(&app.snapshot(), &post.id)?)).into_response());
    }
    let id = post.id.clone();
    let s = app.commit(Record::PostIngested { post }).await?;
    Ok((StatusCode::CREATED, Json(post_view(&s, &id)?)).into_response())
}

async fn list_posts(Extract(app): Extract<AppState>) -> Json<Value> {
    let s = app.snapshot();
    let posts: Vec<Value> = s
        .posts
        .values()
        .map(|p| {
            json!({
                "id": p.post.id,
                "source": p.post.source,
                "language": p.post.language,
                "sentences": p.sentences.len(),
                "has_pathway": s.pathways.contains_key(&p.post.id),
            })
        })
        .collect();
    Json(Value::Array(posts))
}

async fn get_post(Extract(app): Extract<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(post_view(&app.snapshot(), &id)?))
}

fn pathway_view(s: &State, id: &str, stored: &StoredPathway) -> Value {
    let sentences: Vec<Value> = s.posts[id]
        .sentences
        .iter()
        .zip(&stored.predictions)
        .map(|(sentence, p)| {
            json!({
                "index": sentence.index,
                "text": sentence.text,
                "label": p.label,
                "confidence": p.confidence,
                "display_confidence": p.display_confidence(),
                "provenance": p.provenance,
            })
        })
        .collect();
    json!({
        "post_id": id,
        "backend": stored.backend,
        "pathway": stored.pathway.pathway,
        "summaries": stored.effective_summaries(),
        "sentences": sentences,
        "review": stored.review,
        "timestamp": stored.timestamp,
    })
}

#[derive(Debug, Deserialize)]
struct ExtractRequest {
    post_id: String,
    #[serde(default = "default_backend")]
    backend: String,
}

fn default_backend() -> String {
    "mock".into()
}

type Backends = (Arc<dyn ClassifierBackend>, Arc<dyn SummarizerBackend>);

fn backends(app: &AppState, s: &State, post_id: &str, name: &str) -> ApiResult<Backends> {
    match name {
        "mock" => {
            let gold: Vec<_> = s.gold_annotations().into_iter().filter(|a| a.sentence.post_id == post_id).collect();
            Ok((Arc::new(MockClassifier::from_annotations(&gold)), Arc::new(IdentitySummarizer)))
        }
        "remote" => {
            let remote = app
                .config()
                .remote
                .as_ref()
                .ok_or_else(|| ApiError::unavailable("remote backend is not configured"))?;
            let token = remote.token_env.as_deref().and_then(|v| std::env::var(v).ok());
            Ok((
                Arc::new(RemoteClassifier::new(&remote.url, token.clone())),
                Arc::new(RemoteSummarizer::new(&remote.url, token)),
            ))
        }
        "llm" => {
            let client = app.inner.llm.clone().ok_or_else(|| ApiError::unavailable("llm backend is not configured"))?;
            Ok((
                Arc::new(LlmClassifier::new(Arc::clone(&client))),
                Arc::new(LlmSummarizer::new(client, app.inner.scheme.clone())),
            ))
        }
        other => Err(ApiError::bad_request(format!("unknown backend {other:?}; expected mock, remote or llm"))),
    }
}

async fn extract(Extract(app): Extract<AppState>, ApiJson(req): ApiJson<ExtractRequest>) -> ApiResult<Json<Value>> {
    let s = app.snapshot();
    let post =
        s.posts.get(&req.post_id).ok_or_else(|| ApiError::not_found(format!("unknown post {:?}", req.post_id)))?;
    if s.pathways.get(&req.post_id).is_some_and(|p| p.review.approved) {
        return Err(ApiError::new(StatusCode::CONFLICT, "conflict", "pathway is approved and locked"));
    }
    let (classifier, summarizer) = backends(&app, &s, &req.post_id, &req.backend)?;
    let post = post.post.clone();
    let scheme = app.inner.scheme.clone();
    let config = PathwayConfig { batch_size: app.config().batch_size, ..PathwayConfig::default() };
    let extraction = tokio::task::spawn_blocking(move || {
        extract_pathway(&post, classifier.as_ref(), summarizer.as_ref(), &scheme, &config)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    let record = Record::PathwayStored {
        backend: req.backend,
        pathway: PathwayExport::from(&extraction.pathway),
        predictions: extraction.predictions,
    };
    let s = app.commit(record).await?;
    Ok(Json(pathway_view(&s, &req.post_id, &s.pathways[&req.post_id])))
}

async fn get_pathway(Extract(app): Extract<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = app.snapshot();
    if !s.posts.contains_key(&id) {
        return Err(ApiError::not_found(format!("unknown post {id:?}")));
    }
    let stored = s.pathways.get(&id).ok_or_else(|| ApiError::not_found(format!("post {id:?} has no pathway yet")))?;
    Ok(Json(pathway_view(&s, &id, stored)))
}

#[derive(Debug, Deserialize)]
struct ReviewRequest {
    editor_id: String,
    #[serde(default)]
    summaries: BTreeMap<ParentCategory, String>,
    #[serde(default)]
    approved: bool,
}

async fn review(
    Extract(app): Extract<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<ReviewRequest>,
) -> ApiResult<Json<Value>> {
    if req.editor_id.trim().is_empty() {
        return Err(ApiError::bad_request("editor_id must be non-empty"));
    }
    let record = Record::PathwayReviewed {
        post_id: id.clone(),
        editor_id: req.editor_id,
        summaries: req.summaries,
        approved: req.approved,
    };
    let s = app.commit(record).await?;
    Ok(Json(pathway_view(&s, &id, &s.pathways[&id])))
}

#[derive(Debug, Deserialize)]
struct ProposalRequest {
    post_id: String,
    index: usize,
    annotator_id: String,
    labels: Vec<RawLabelEntry>,
}

async fn propose(Extract(app): Extract<AppState>, ApiJson(req): ApiJson<ProposalRequest>) -> ApiResult<Json<Value>> {
    let label = app.resolve(&req.labels)?;
    let sentence = SentenceRef { post_id: req.post_id, index: req.index };
    let record =
        Record::AnnotationProposed { sentence: sentence.clone(), annotator_id: req.annotator_id.clone(), label };
    let s = app.commit(record).await?;
    Ok(Json(json!({
        "proposal": s.proposals[&sentence][&req.annotator_id],
        "in_conflict": s.in_conflict(&sentence) && !s.adjudications.contains_key(&sentence),
        "gold": s.gold(&sentence).map(|(label, source)| json!({ "label": label, "source": source })),
    })))
}

#[derive(Debug, Deserialize)]
struct AdjudicationRequest {
    post_id: String,
    index: usize,
    adjudicator_id: String,
    labels: Vec<RawLabelEntry>,
}

async fn adjudicate(
    Extract(app): Extract<AppState>,
    ApiJson(req): ApiJson<AdjudicationRequest>,
) -> ApiResult<Response> {
    if req.adjudicator_id.trim().is_empty() {
        return Err(ApiError::bad_request("adjudicator_id must be non-empty"));
    }
    let label = app.resolve(&req.labels)?;
    let sentence = SentenceRef { post_id: req.post_id, index: req.index };
    let superseded =
        app.snapshot().proposals.get(&sentence).map(|m| m.values().map(|p| p.id).collect()).unwrap_or_default();
    let record =
        Record::Adjudicated { sentence: sentence.clone(), adjudicator_id: req.adjudicator_id, label, superseded };
    let s = app.commit(record).await?;
    Ok((StatusCode::CREATED, Json(json!({ "adjudication": s.adjudications[&sentence], "sentence": sentence })))
        .into_response())
}

async fn disagreements(Extract(app): Extract<AppState>) -> Json<Value> {
    Json(serde_json::to_value(app.snapshot().disagreements()).unwrap_or(Value::Null))
}

async fn export_gold(Extract(app): Extract<AppState>) -> Response {
    let mut body = String::new();
    for r in app.snapshot().gold_records() {
        body.push_str(&serde_json::to_string(&r).unwrap_or_default());
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

#[derive(Serialize)]
struct ReportBody {
    sentences: usize,
    report: cogpath_core::metrics::ClassificationReport,
    table: String,
}

async fn report(Extract(app): Extract<AppState>) -> ApiResult<Json<ReportBody>> {
    let (gold, pred) = app.snapshot().evaluation_pairs();
    let report = classification_report(&gold, &pred).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(ReportBody { sentences: gold.len(), table: report.render(), report }))
}
