mod common;

use std::time::Duration;

use argweave::engine::{DataPaths, Engine};
use argweave::service::{router, AppState};
use argweave_core::semgraph::{graph_stats, load_graph};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(engine: Option<Engine>) -> (Router, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(dir.path(), DataPaths::in_dir(dir.path()), engine);
    (router(state), dir)
}

/// Serves the mini-corpus graph. Read-only tests never touch the data dir.
fn app() -> Router {
    let (engine, _) = common::mini_engine();
    let state = AppState::new("unused", DataPaths::in_dir("unused"), Some(engine));
    router(state)
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health_reports_loaded_graph() {
    let (s, body) = send(&app(), "GET", "/api/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok", "graph_loaded": true}));
}

#[tokio::test]
async fn read_endpoints_need_a_graph() {
    let (empty, _dir) = app_with(None);
    let (s, body) = send(&empty, "GET", "/api/graph/stats", None).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"]["code"], "NO_GRAPH");
    let (s, _) = send(&empty, "POST", "/api/case", Some(json!({"start": "a", "end": "b"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn stats_match_direct_computation() {
    let (engine, bytes) = common::mini_engine();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.awkg");
    std::fs::write(&path, &bytes).unwrap();
    let direct = graph_stats(&load_graph(&path).unwrap());
    let (app, _d) = app_with(Some(engine));
    let (s, body) = send(&app, "GET", "/api/graph/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["vertices"], direct.vertex_count);
    assert_eq!(body["edges"], direct.edge_count);
    assert_eq!(body["average_degree"].as_f64().unwrap(), direct.average_degree);
    assert_eq!(body["config"]["similarity_threshold"], 0.10);
}

#[tokio::test]
async fn case_results_are_sorted_by_cost() {
    let app = app();
    let req = json!({"start": "Warming is real", "end": "Nuclear war causes extinction", "k": 5});
    let (s, body) = send(&app, "POST", "/api/case", Some(req.clone())).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let cases = body["cases"].as_array().unwrap();
    assert!(!cases.is_empty() && cases.len() <= 5);
    let costs: Vec<f64> = cases.iter().map(|c| c["total_cost"].as_f64().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
    for c in cases {
        let entries = c["entries"].as_array().unwrap();
        assert!(entries.len() <= 12);
        let words: u64 = entries.iter().map(|e| e["extract"].as_str().unwrap().split_whitespace().count() as u64).sum();
        assert_eq!(c["total_extract_words"], words);
    }
    let (_, again) = send(&app, "POST", "/api/case", Some(req)).await;
    assert_eq!(body, again);
}

#[tokio::test]
async fn case_validation_and_failures() {
    let app = app();
    let cases = [
        (json!({"start": "", "end": "x"}), StatusCode::BAD_REQUEST, "INVALID_REQUEST"),
        (json!({"start": "a", "end": "b", "k": 0}), StatusCode::BAD_REQUEST, "INVALID_REQUEST"),
        (json!({"start": "a", "end": "b", "k": 101}), StatusCode::BAD_REQUEST, "INVALID_REQUEST"),
        (json!({"start": "a", "end": "b", "bogus": 1}), StatusCode::BAD_REQUEST, "INVALID_REQUEST"),
        (json!({"start": "a", "end": "b", "filter": "year >"}), StatusCode::BAD_REQUEST, "SYNTAX_ERROR"),
        (json!({"start": "a", "end": "b", "filter": "color = 'red'"}), StatusCode::BAD_REQUEST, "UNKNOWN_FIELD"),
        (
            json!({"start": "Warming is real", "end": "Nuclear war", "filter": "year > 3000"}),
            StatusCode::UNPROCESSABLE_ENTITY,
            "NO_CANDIDATE",
        ),
    ];
    for (body, status, code) in cases {
        let (s, resp) = send(&app, "POST", "/api/case", Some(body.clone())).await;
        assert_eq!((s, resp["error"]["code"].as_str().unwrap()), (status, code), "{body} -> {resp}");
    }
    let raw = Request::post("/api/case").body(Body::from("{not json")).unwrap();
    assert_eq!(app.clone().oneshot(raw).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn query_syntax_error_has_position() {
    let (s, body) = send(&app(), "POST", "/api/query", Some(json!({"filter": "year ="}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "SYNTAX_ERROR");
    assert_eq!(body["error"]["position"], json!({"line": 1, "column": 7}));
    let (s, body) = send(&app(), "POST", "/api/query", Some(json!({"filter": "year = "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["position"], json!({"line": 1, "column": 8}));
}

#[tokio::test]
async fn query_filters_and_ranks() {
    let app = app();
    let (s, body) = send(&app, "POST", "/api/query", Some(json!({"filter": "camp = 'Gonzaga'", "limit": 100}))).await;
    assert_eq!(s, StatusCode::OK);
    let rows = body["results"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["camp"] == "Gonzaga"));

    let filter = "year >= 2013 AND SIMILAR('nuclear war causes extinction')";
    let (_, body) = send(&app, "POST", "/api/query", Some(json!({"filter": filter, "limit": 3}))).await;
    let rows = body["results"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let scores: Vec<f64> = rows.iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let (_, all) = send(&app, "POST", "/api/query", Some(json!({"filter": "", "limit": 1000}))).await;
    assert_eq!(all["results"].as_array().unwrap().len(), 61);
}

#[tokio::test]
async fn communities_are_ranked() {
    let (s, body) = send(&app(), "GET", "/api/communities?top=2", None).await;
    assert_eq!(s, StatusCode::OK);
    let list = body["communities"].as_array().unwrap();
    let sizes: Vec<u64> = list.iter().map(|c| c["size"].as_u64().unwrap()).collect();
    assert_eq!(sizes.iter().sum::<u64>(), 61);
    assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    for c in list {
        let top = c["top_members"].as_array().unwrap();
        assert!(!top.is_empty() && top.len() <= 2);
        let pr: Vec<f64> = top.iter().map(|m| m["pagerank"].as_f64().unwrap()).collect();
        assert!(pr.windows(2).all(|w| w[0] >= w[1]));
    }
}

async fn wait_for(app: &Router, job: u64) -> Value {
    for _ in 0..500 {
        let (s, body) = send(app, "GET", &format!("/api/graph/build/{job}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if body["state"] == "succeeded" || body["state"] == "failed" {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("build job {job} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ingest_then_build_and_activate() {
    let (app, dir) = app_with(None);
    let jsonl = std::fs::read_to_string(common::mini_corpus_path()).unwrap();
    let bad = format!("{jsonl}{{\"id\": \"broken\"}}\n");
    let (s, body) = send(&app, "POST", "/api/corpus", Some(json!({"jsonl": bad, "strict": true}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"]["code"], "CORPUS_REJECTED");

    let (s, body) = send(&app, "POST", "/api/corpus", Some(json!({"jsonl": bad}))).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!((body["loaded"].as_u64(), body["rejected"].as_u64()), (Some(61), Some(1)));

    let (s, first) = send(&app, "POST", "/api/graph/build", Some(json!({}))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(first["state"], "queued");
    let done = wait_for(&app, first["job_id"].as_u64().unwrap()).await;
    let (_, health) = send(&app, "GET", "/api/health", None).await;
    assert_eq!(health["graph_loaded"], false, "builds without activate leave the served graph alone");
    let (_, second) =
        send(&app, "POST", "/api/graph/build", Some(json!({"activate": true, "output": "main.awkg"}))).await;

    assert_eq!(done["state"], "succeeded", "{done}");
    assert_eq!(done["done"], done["total"]);
    assert_eq!(done["total"], 61);
    assert!(dir.path().join("graph-1.awkg").exists() && dir.path().join("graph-1.awev").exists());
    let activated = wait_for(&app, second["job_id"].as_u64().unwrap()).await;
    assert_eq!(activated["state"], "succeeded");

    let (s, stats) = send(&app, "GET", "/api/graph/stats", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stats["vertices"], 61);
    assert_eq!(stats["edges"], activated["stats"]["edge_count"]);
    let reference = graph_stats(&load_graph(dir.path().join("graph-1.awkg")).unwrap());
    assert_eq!(stats["edges"], reference.edge_count);
    assert_eq!(
        std::fs::read(dir.path().join("main.awkg")).unwrap(),
        std::fs::read(dir.path().join("graph-1.awkg")).unwrap()
    );
}

#[tokio::test]
async fn build_request_validation() {
    let (app, _dir) = app_with(None);
    for body in [
        json!({"threshold": 0.0}),
        json!({"edge_limit": 0}),
        json!({"output": "../escape.awkg"}),
        json!({"granularity": "paragraph"}),
        json!({"unknown": true}),
    ] {
        let (s, resp) = send(&app, "POST", "/api/graph/build", Some(body.clone())).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body} -> {resp}");
    }
    let (s, body) = send(&app, "GET", "/api/graph/build/99", None).await;
    assert_eq!((s, body["error"]["code"].as_str()), (StatusCode::NOT_FOUND, Some("NOT_FOUND")));
    let (s, _) = send(&app, "GET", "/api/graph/build/abc", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn build_without_corpus_fails_cleanly() {
    let (app, _dir) = app_with(None);
    let (_, job) = send(&app, "POST", "/api/graph/build", Some(json!({}))).await;
    let done = wait_for(&app, job["job_id"].as_u64().unwrap()).await;
    assert_eq!(done["state"], "failed");
    assert!(done["error"].as_str().unwrap().contains("corpus.jsonl"));
}
