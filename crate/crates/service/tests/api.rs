mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::oracle_document;
use irp_core::runlog::RunLog;
use irp_service::{http, Registry, RegistryConfig};

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut request = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(value) => {
            request = request.header(header::CONTENT_TYPE, "application/json");
            Body::from(value.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        content_type,
        body: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

fn app() -> Router {
    http::router(Arc::new(Registry::new(RegistryConfig::default())))
}

async fn oracle_session(app: &Router) -> String {
    let reply = call(app, Method::POST, "/api/sessions", Some(json!({"document": oracle_document()}))).await;
    assert_eq!(reply.status, StatusCode::CREATED, "{}", reply.body);
    reply.json()["session_id"].as_str().unwrap().to_string()
}

async fn finished_run(app: &Router, session: &str, body: Value) -> String {
    let reply = call(app, Method::POST, &format!("/api/sessions/{session}/runs"), Some(body)).await;
    assert_eq!(reply.status, StatusCode::ACCEPTED, "{}", reply.body);
    assert_eq!(reply.json()["status"], "running");
    let run = reply.json()["run_id"].as_str().unwrap().to_string();
    for _ in 0..2000 {
        let poll = call(app, Method::GET, &format!("/api/sessions/{session}/runs/{run}/trace?since=0"), None).await;
        if poll.json()["status"] != "running" {
            return run;
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
    panic!("run did not finish");
}

#[tokio::test]
async fn session_and_front() {
    let app = app();
    let session = oracle_session(&app).await;
    let front = call(&app, Method::GET, &format!("/api/sessions/{session}/front"), None).await;
    assert_eq!(front.status, StatusCode::OK);
    let points: Vec<(u64, f64)> = front.json()["approximation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p["g1"].as_u64().unwrap(), p["g2"].as_f64().unwrap()))
        .collect();
    assert_eq!(points, vec![(0, 36.0), (5, 24.0), (15, 12.0)]);
    assert_eq!(front.json()["approximation"][0]["pi"], json!([1, 1]));
}

#[tokio::test]
async fn errors_are_structured() {
    let app = app();
    let bad = call(&app, Method::POST, "/api/sessions", Some(json!({"document": "horizon = ["}))).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad.json()["code"], "invalid_instance");
    assert!(bad.json()["message"].as_str().unwrap().contains("line"));

    let neither = call(&app, Method::POST, "/api/sessions", Some(json!({}))).await;
    assert_eq!(neither.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(neither.json()["field"], "path");

    let unknown = call(&app, Method::GET, "/api/sessions/nope/front", None).await;
    assert_eq!(unknown.status, StatusCode::NOT_FOUND);
    assert_eq!(unknown.json()["code"], "unknown_session");

    let session = oracle_session(&app).await;
    let runs = format!("/api/sessions/{session}/runs");
    let no_rp = call(&app, Method::POST, &runs, Some(json!({"mode": "guided", "evaluation_budget": 100}))).await;
    assert_eq!(no_rp.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(no_rp.json()["code"], "missing_reference_point");
    assert_eq!(no_rp.json()["field"], "reference_point");

    let malformed = call(&app, Method::POST, &runs, Some(json!({"mode": "sideways"}))).await;
    assert_eq!(malformed.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(malformed.json()["code"], "invalid_request");

    let missing_run = call(&app, Method::GET, &format!("{runs}/nope/trace"), None).await;
    assert_eq!(missing_run.status, StatusCode::NOT_FOUND);
    assert_eq!(missing_run.json()["code"], "unknown_run");

    let run = finished_run(&app, &session, json!({"mode": "offline", "evaluation_budget": 50})).await;
    let format = call(&app, Method::GET, &format!("{runs}/{run}/export?format=xml"), None).await;
    assert_eq!(format.status, StatusCode::BAD_REQUEST);
    assert_eq!(format.json()["code"], "unknown_format");
    assert_eq!(format.json()["field"], "format");

    let nowhere = call(&app, Method::GET, "/api/elsewhere", None).await;
    assert_eq!(nowhere.status, StatusCode::NOT_FOUND);
    assert!(nowhere.json()["message"].is_string());
}

#[tokio::test]
async fn guided_run_lifecycle() {
    let app = app();
    let session = oracle_session(&app).await;
    let body = json!({
        "mode": "guided",
        "reference_point": {"r": [5.0, 24.0], "label": "R2"},
        "evaluation_budget": 300,
        "trace_stride": 1
    });
    let run = finished_run(&app, &session, body).await;
    let base = format!("/api/sessions/{session}/runs/{run}");

    let trace = call(&app, Method::GET, &format!("{base}/trace?since=0"), None).await.json();
    assert_eq!(trace["status"], "finished");
    let points = trace["points"].as_array().unwrap();
    assert!(!points.is_empty());
    assert!(trace["termination_reason"].is_string());
    let last = points.last().unwrap()["eval_index"].as_u64().unwrap();
    let tail = call(&app, Method::GET, &format!("{base}/trace?since={last}"), None).await.json();
    assert_eq!(tail["points"], json!([]));

    let stop = call(&app, Method::POST, &format!("{base}/stop"), None).await;
    assert_eq!(stop.status, StatusCode::OK);
    assert_eq!(stop.json()["status"], "finished");

    let log = call(&app, Method::GET, &format!("{base}/export?format=run_log"), None).await;
    assert_eq!(log.content_type.as_deref(), Some("application/x-ndjson"));
    let parsed = RunLog::parse(&log.body).unwrap();
    assert_eq!(serde_json::to_value(&parsed.points).unwrap(), trace["points"]);
    assert_eq!(parsed.header.reference_point.unwrap().label, "R2");

    let csv = call(&app, Method::GET, &format!("{base}/export?format=front_csv"), None).await;
    assert_eq!(csv.content_type.as_deref(), Some("text/csv; charset=utf-8"));
    assert!(csv.body.starts_with("eval_index,g1,g2,pi\n"));
    assert!(!csv.body.contains('\r'));

    let plan = call(&app, Method::GET, &format!("{base}/export?format=plan_json"), None).await;
    assert_eq!(plan.status, StatusCode::OK);
    let plan = plan.json();
    assert!(plan["plan"]["quantities"].is_array());
    assert!(plan["plan"]["per_period_routes"].is_array());

    let front = call(&app, Method::GET, &format!("/api/sessions/{session}/front"), None).await.json();
    assert!(front["weights"]["w"].is_array());
    assert_eq!(front["runs"], json!([run]));
}

#[tokio::test]
async fn stop_over_http() {
    let app = app();
    let document = common::generated_document(1, 40, 25);
    let reply = call(&app, Method::POST, "/api/sessions", Some(json!({"document": document}))).await;
    let session = reply.json()["session_id"].as_str().unwrap().to_string();
    let started = call(
        &app,
        Method::POST,
        &format!("/api/sessions/{session}/runs"),
        Some(json!({"mode": "offline", "evaluation_budget": 100_000_000u64})),
    )
    .await;
    let run = started.json()["run_id"].as_str().unwrap().to_string();
    let base = format!("/api/sessions/{session}/runs/{run}");
    let active = call(&app, Method::GET, &format!("{base}/export?format=front_csv"), None).await;
    assert_eq!(active.status, StatusCode::CONFLICT);
    assert_eq!(active.json()["code"], "run_active");
    for _ in 0..2 {
        let stop = call(&app, Method::POST, &format!("{base}/stop"), None).await;
        assert_eq!(stop.status, StatusCode::OK);
        assert_eq!(stop.json()["status"], "stopped");
    }
    let trace = call(&app, Method::GET, &format!("{base}/trace"), None).await.json();
    assert_eq!(trace["termination_reason"], "user_stop");
}
