#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use chartalk_core::agent::{ChatEvent, MockTranscript, ScriptedProvider, SseDecoder, StubVlm};
use chartalk_service::config::{ServiceConfig, VlmKind};
use chartalk_service::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const BOUNDARY: &str = "chartalk-test-boundary";

pub fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn multipart(parts: &[(&str, &str)]) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, value) in parts {
        let disposition = if *name == "csv" {
            format!("form-data; name=\"{name}\"; filename=\"data.csv\"\r\nContent-Type: text/csv")
        } else {
            format!("form-data; name=\"{name}\"")
        };
        out.extend_from_slice(format!("--{BOUNDARY}\r\nContent-Disposition: {disposition}\r\n\r\n{value}\r\n").as_bytes());
    }
    out.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    out
}

pub fn upload_request(csv: &str, spec: &str, description: Option<&str>) -> Request<Body> {
    let mut parts = vec![("csv", csv), ("spec", spec)];
    if let Some(d) = description {
        parts.push(("description", d));
    }
    Request::post("/charts")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&parts)))
        .unwrap()
}

pub struct TestApp {
    pub router: Router,
    pub provider: Arc<ScriptedProvider>,
}

pub fn config(dir: &Path) -> ServiceConfig {
    let mut c = ServiceConfig {
        storage_dir: dir.to_path_buf(),
        ..ServiceConfig::default()
    };
    c.provider.vlm = VlmKind::Stub;
    c
}

pub fn app_with(dir: &Path, script: MockTranscript) -> TestApp {
    let provider = Arc::new(ScriptedProvider::new(script));
    let state = AppState::new(config(dir), provider.clone(), Some(Arc::new(StubVlm::default()))).unwrap();
    TestApp {
        router: router(state),
        provider,
    }
}

pub fn app(dir: &Path) -> TestApp {
    app_with(dir, MockTranscript::from_json(&fixture("mock_reply.json")).unwrap())
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }
}

pub async fn send(router: &Router, req: Request<Body>) -> Reply {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub async fn get(router: &Router, uri: &str) -> Reply {
    send(router, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post(router: &Router, uri: &str, body: &str) -> Reply {
    send(
        router,
        Request::post(uri)
            .header("content-type", "text/plain; charset=utf-8")
            .body(Body::from(body.to_string()))
            .unwrap(),
    )
    .await
}

pub async fn upload(router: &Router, spec_file: &str) -> String {
    let r = send(router, upload_request(&fixture("scores.csv"), &fixture(spec_file), Some("Final exam scores of 91 students."))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    r.json()["chart_id"].as_str().unwrap().to_string()
}

pub async fn open_session(router: &Router, chart_id: &str, mode: &str) -> String {
    let r = post(router, &format!("/charts/{chart_id}/sessions?mode={mode}"), "").await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    r.json()["session_id"].as_str().unwrap().to_string()
}

/// Event names and decoded payloads of an SSE body.
pub fn sse_events(body: &[u8]) -> Vec<(String, ChatEvent)> {
    let text = String::from_utf8_lossy(body);
    let mut names = Vec::new();
    for block in text.split("\n\n") {
        if let Some(name) = block.lines().find_map(|l| l.strip_prefix("event: ")) {
            names.push(name.to_string());
        }
    }
    let mut dec = SseDecoder::default();
    let payloads = dec.push(body);
    assert_eq!(names.len(), payloads.len(), "{text}");
    names
        .into_iter()
        .zip(payloads)
        .map(|(n, p)| (n, serde_json::from_str(&p).unwrap_or_else(|e| panic!("{e}: {p}"))))
        .collect()
}
