use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use cogpath_core::testing::{StubResponse, StubServer};
use cogpath_service::{router, AppState, RemoteEndpoint, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    _dir: tempfile::TempDir,
    config: ServiceConfig,
    app: Router,
    state: AppState,
}

impl Harness {
    fn new() -> Self {
        Self::with(|_| {})
    }

    fn with(tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServiceConfig { store_path: dir.path().join("store.jsonl"), ..ServiceConfig::default() };
        tweak(&mut config);
        let (state, _) = AppState::open(config.clone()).unwrap();
        Self { _dir: dir, app: router(state.clone()), state, config }
    }

    fn reopen(&self) -> AppState {
        AppState::open(self.config.clone()).unwrap().0
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, String) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(token) = &self.config.auth_token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {token}"));
        }
        let req = match body {
            Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let (status, text) = self.send(req).await;
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    async fn ingest(&self, id: &str, text: &str) {
        let (s, _) =
            self.call(Method::POST, "/v1/posts", Some(json!({"id": id, "language": "en", "text": text}))).await;
        assert_eq!(s, StatusCode::CREATED);
    }

    async fn propose(&self, post: &str, index: usize, who: &str, labels: Value) -> (StatusCode, Value) {
        self.call(
            Method::PUT,
            "/v1/annotations",
            Some(json!({"post_id": post, "index": index, "annotator_id": who, "labels": labels})),
        )
        .await
    }
}

fn life() -> Value {
    json!([{"parent": "A", "children": ["life"]}])
}

fn filter() -> Value {
    json!([{"parent": "B", "children": ["mental_filter"]}])
}

#[tokio::test]
async fn ingest_is_idempotent_and_validated() {
    let h = Harness::new();
    h.ingest("p1", "I lost my job. Everything is ruined.").await;
    let body = json!({"id": "p1", "language": "en", "text": "I lost my job. Everything is ruined."});
    let (s, v) = h.call(Method::POST, "/v1/posts", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["sentences"].as_array().unwrap().len(), 2);

    let (s, _) = h.call(Method::POST, "/v1/posts", Some(json!({"id": "p1", "language": "en", "text": "Other."}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = h.call(Method::POST, "/v1/posts", Some(json!({"id": "p2", "language": "fr", "text": "x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "invalid_request");
    let (s, _) = h.call(Method::POST, "/v1/posts", Some(json!({"id": "p3", "language": "en", "text": "  "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let req = Request::post("/v1/posts").body(Body::from(r#"{"id":"p4","language":"en","text":"x"}"#)).unwrap();
    assert_eq!(h.send(req).await.0, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let (s, v) = h.call(Method::GET, "/v1/posts", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(h.call(Method::GET, "/v1/posts/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn disagreement_lifecycle() {
    let h = Harness::new();
    h.ingest("p", "My job is gone. I only see the bad parts. I cried.").await;
    assert_eq!(h.propose("p", 0, "ann1", life()).await.0, StatusCode::OK);
    assert_eq!(h.propose("p", 0, "ann2", life()).await.0, StatusCode::OK);
    h.propose("p", 1, "ann1", filter()).await;
    let (_, v) = h.propose("p", 1, "ann2", life()).await;
    assert_eq!(v["in_conflict"], true);
    h.propose("p", 2, "ann1", life()).await;

    let (_, d) = h.call(Method::GET, "/v1/disagreements", None).await;
    let d = d.as_array().unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0]["sentence"], json!({"post_id": "p", "index": 1}));
    assert_eq!(d[0]["proposals"].as_array().unwrap().len(), 2);

    let adj = json!({"post_id": "p", "index": 1, "adjudicator_id": "expert", "labels": filter()});
    let (s, v) = h.call(Method::POST, "/v1/adjudications", Some(adj.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["adjudication"]["superseded"].as_array().unwrap().len(), 2);
    assert_eq!(h.call(Method::GET, "/v1/disagreements", None).await.1, json!([]));
    assert_eq!(h.call(Method::POST, "/v1/adjudications", Some(adj)).await.0, StatusCode::CONFLICT);

    let agreed = json!({"post_id": "p", "index": 0, "adjudicator_id": "expert", "labels": life()});
    assert_eq!(h.call(Method::POST, "/v1/adjudications", Some(agreed)).await.0, StatusCode::CONFLICT);
    let single = json!({"post_id": "p", "index": 2, "adjudicator_id": "expert", "labels": life()});
    assert_eq!(h.call(Method::POST, "/v1/adjudications", Some(single)).await.0, StatusCode::CONFLICT);

    let req = Request::get("/v1/export/gold").body(Body::empty()).unwrap();
    let (s, text) = h.send(req).await;
    assert_eq!(s, StatusCode::OK);
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["index"], 0);
    assert_eq!(lines[0]["labels"], life());
    assert_eq!(lines[1]["labels"], filter());
    assert_eq!(lines[1]["text"], "I only see the bad parts.");
}

#[tokio::test]
async fn invalid_labels_are_rejected_with_details() {
    let h = Harness::new();
    h.ingest("p", "One sentence.").await;
    let (s, v) = h.propose("p", 0, "a", json!([{"parent": "A", "children": ["mental_filter"]}])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "invalid_label");
    assert_eq!(v["details"]["violations"][0]["kind"], "child_under_wrong_parent");
    let (s, _) = h.propose("p", 0, "a", json!([{"parent": "B", "children": ["catastrophizing"]}])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(h.propose("nope", 0, "a", life()).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.propose("p", 5, "a", life()).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.propose("p", 0, "", life()).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn mock_extraction_review_and_report() {
    let h = Harness::new();
    h.ingest("p", "My job is gone. I only see the bad parts. The sky is blue.").await;
    for who in ["a", "b"] {
        h.propose("p", 0, who, life()).await;
        h.propose("p", 1, who, filter()).await;
        h.propose("p", 2, who, json!([])).await;
    }
    let (s, v) = h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "p", "backend": "mock"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["pathway"]["A"]["composite"], "My job is gone.");
    assert_eq!(v["summaries"]["B"], "I only see the bad parts.");
    assert!(v["pathway"].get("C").is_none());
    assert_eq!(v["sentences"][0]["display_confidence"], 1.0);

    let (s, r) = h.call(Method::GET, "/v1/reports/classification", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["sentences"], 3);
    assert_eq!(r["report"]["overall"]["f1"], 1.0);
    assert!(r["table"].as_str().unwrap().contains("Parent nodes"));

    let edit = json!({"editor_id": "doc", "summaries": {"A": "Lost their job."}});
    let (s, v) = h.call(Method::PUT, "/v1/pathways/p/review", Some(edit)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["summaries"]["A"], "Lost their job.");
    assert_eq!(v["pathway"]["A"]["summary"], "My job is gone.");
    let (s, _) =
        h.call(Method::PUT, "/v1/pathways/p/review", Some(json!({"editor_id": "doc", "summaries": {"D": "x"}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, v) =
        h.call(Method::PUT, "/v1/pathways/p/review", Some(json!({"editor_id": "doc", "approved": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["review"]["approved"], true);
    let (s, _) =
        h.call(Method::PUT, "/v1/pathways/p/review", Some(json!({"editor_id": "doc", "summaries": {"A": "y"}}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "p"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, v) = h.call(Method::GET, "/v1/pathways/p", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["summaries"]["A"], "Lost their job.");
}

#[tokio::test]
async fn extraction_errors() {
    let h = Harness::new();
    h.ingest("p", "Hello there.").await;
    assert_eq!(h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "x"}))).await.0, StatusCode::NOT_FOUND);
    let (s, _) = h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "p", "backend": "llm"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, _) = h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "p", "backend": "magic"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(h.call(Method::GET, "/v1/pathways/p", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.call(Method::GET, "/v1/pathways/zz", None).await.0, StatusCode::NOT_FOUND);
    let (s, _) = h.call(Method::PUT, "/v1/pathways/p/review", Some(json!({"editor_id": "d"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn remote_backend_down_gives_503() {
    let stub = StubServer::scripted(vec![StubResponse::status(500, "down")]).unwrap();
    let url = stub.url();
    let h = Harness::with(|c| c.remote = Some(RemoteEndpoint { url, token_env: None }));
    h.ingest("p", "Hello there.").await;
    let (s, v) = h.call(Method::POST, "/v1/extract", Some(json!({"post_id": "p", "backend": "remote"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"], "backend_unavailable");
    assert_eq!(stub.request_count(), 2);
}

#[tokio::test]
async fn bearer_auth_and_cors() {
    let h = Harness::with(|c| {
        c.auth_token = Some("s3cret".into());
        c.cors_origins = vec!["http://localhost:5173".into()];
    });
    let (s, _) = h.call(Method::GET, "/v1/scheme", None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = h.send(Request::get("/v1/scheme").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED, "{v}");
    let wrong = Request::get("/v1/scheme").header(header::AUTHORIZATION, "Bearer nope").body(Body::empty()).unwrap();
    assert_eq!(h.send(wrong).await.0, StatusCode::UNAUTHORIZED);

    let preflight = Request::builder()
        .method(Method::OPTIONS)
        .uri("/v1/annotations")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "PUT")
        .body(Body::empty())
        .unwrap();
    let resp = h.app.clone().oneshot(preflight).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}

#[tokio::test]
async fn scheme_endpoint_lists_taxonomy() {
    let h = Harness::new();
    let (s, v) = h.call(Method::GET, "/v1/scheme", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["version"], "abcd-v1");
    let children = v["children"].as_array().unwrap();
    assert_eq!(children.len(), 19);
    assert_eq!(children.iter().filter(|c| c["parent"] == "B").count(), 10);
    assert_eq!(children.iter().filter(|c| c["parent"] == "D").count(), 2);
}

#[tokio::test]
async fn restart_replays_to_same_state() {
    let h = Harness::new();
    h.ingest("p", "One. Two. Three.").await;
    h.propose("p", 0, "a", life()).await;
    h.propose("p", 0, "b", filter()).await;
    let before = h.state.snapshot().hash();
    let reopened = h.reopen();
    assert_eq!(reopened.snapshot().hash(), before);
    assert_eq!(reopened.snapshot().seq, 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writes_are_serialized() {
    let h = std::sync::Arc::new(Harness::new());
    h.ingest("p", "A. B. C. D. E. F. G. H.").await;
    let mut tasks = Vec::new();
    for i in 0..8 {
        for who in ["a", "b"] {
            let h = std::sync::Arc::clone(&h);
            tasks.push(tokio::spawn(async move { h.propose("p", i, who, life()).await.0 }));
        }
    }
    let mut readers = Vec::new();
    for _ in 0..8 {
        let h = std::sync::Arc::clone(&h);
        readers.push(tokio::spawn(async move {
            let s = h.state.snapshot();
            s.proposals.values().map(|m| m.len()).sum::<usize>() as u64 + 1 == s.seq
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    for r in readers {
        assert!(r.await.unwrap(), "reader saw a torn state");
    }
    let s = h.state.snapshot();
    assert_eq!(s.seq, 17);
    assert_eq!(h.reopen().snapshot().hash(), s.hash());
    let (_, text) = h.send(Request::get("/v1/export/gold").body(Body::empty()).unwrap()).await;
    assert_eq!(text.lines().count(), 8);
}
