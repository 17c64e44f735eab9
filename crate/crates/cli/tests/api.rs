use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use tripassist_cli::server::{router, AppState};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn raw(app: &Router, method: &str, uri: &str, body: &str) -> StatusCode {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    app.clone().oneshot(req).await.unwrap().status()
}

fn small_session(id: &str) -> Value {
    json!({
        "session_id": id,
        "generate": { "n_pois": 12, "seed": 3 },
        "config": { "seed": 1, "assistant": { "n_particles": 16 } }
    })
}

async fn app_with(id: &str) -> Router {
    let app = router(Arc::new(AppState::new(None)));
    let (status, _) = call(&app, "POST", "/sessions", Some(small_session(id))).await;
    assert_eq!(status, StatusCode::CREATED);
    app
}

fn first_add(view: &Value) -> String {
    view["legal_changes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["kind"] == "add")
        .map(|c| format!("add:{}", c["poi"]))
        .unwrap()
}

#[tokio::test]
async fn new_session_starts_empty() {
    let app = app_with("s1").await;
    let (status, view) = call(&app, "GET", "/sessions/s1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["trip"]["tour"], json!([]));
    assert_eq!(view["iteration"], 0);
    for field in ["walking_time", "visit_time", "total_duration", "total_cost", "tour_length"] {
        assert_eq!(view["outcomes"][field], 0.0, "{field}");
    }
    assert_eq!(view["posterior"]["n_particles"], 16);
    assert_eq!(view["legal_changes"][0], json!({ "kind": "noop" }));
    let (_, city) = call(&app, "GET", "/sessions/s1/city", None).await;
    assert_eq!(city["pois"].as_array().unwrap().len(), 12);
}

#[tokio::test]
async fn generated_ids_are_unique() {
    let app = router(Arc::new(AppState::new(None)));
    let body = json!({ "generate": { "n_pois": 5 }, "config": { "assistant": { "n_particles": 4 } } });
    let (_, a) = call(&app, "POST", "/sessions", Some(body.clone())).await;
    let (_, b) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_ne!(a["session_id"], b["session_id"]);
    let (_, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn inline_city_is_accepted() {
    let city = tripassist::City::generate(6, 9, &tripassist::CityConfig::default()).unwrap();
    let app = router(Arc::new(AppState::new(None)));
    let body = json!({ "session_id": "inline", "city": city, "config": { "assistant": { "n_particles": 4 } } });
    let (status, _) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, got) = call(&app, "GET", "/sessions/inline/city", None).await;
    assert_eq!(serde_json::from_value::<tripassist::City>(got).unwrap(), city);
}

#[tokio::test]
async fn choosing_an_add_extends_the_trip() {
    let app = app_with("s").await;
    let (_, view) = call(&app, "GET", "/sessions/s", None).await;
    let add = first_add(&view);
    let poi: u64 = add[4..].parse().unwrap();
    let (status, after) = call(&app, "POST", "/sessions/s/choose", Some(json!({ "change": add }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["trip"]["tour"], json!([poi]));
    assert_eq!(after["iteration"], 1);
    let (_, trace) = call(&app, "GET", "/sessions/s/trace", None).await;
    assert_eq!(trace["history"].as_array().unwrap().len(), 1);
    assert_eq!(trace["history"][0]["recommendation"], Value::Null);
}

#[tokio::test]
async fn served_recommendation_is_recorded_with_the_choice() {
    let app = app_with("r").await;
    let (status, rec) = call(&app, "GET", "/sessions/r/recommendation", None).await;
    assert_eq!(status, StatusCode::OK);
    let served = rec["change"].clone();
    assert_eq!(served["kind"], "add");
    assert!(rec["whatif"]["outcome_deltas"]["total_cost"].is_number());
    let (_, again) = call(&app, "GET", "/sessions/r/recommendation", None).await;
    assert_eq!(again["change"], served, "one recommendation per iteration");

    let (_, view) = call(&app, "GET", "/sessions/r", None).await;
    assert_eq!(view["recommendation"], served);
    let other = view["legal_changes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["kind"] == "add" && **c != served)
        .cloned()
        .unwrap();
    let (status, _) = call(&app, "POST", "/sessions/r/choose", Some(json!({ "change": other }))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, trace) = call(&app, "GET", "/sessions/r/trace", None).await;
    assert_eq!(trace["history"][0]["recommendation"], served);
    assert_eq!(trace["history"][0]["chosen"], other);
    let (_, view) = call(&app, "GET", "/sessions/r", None).await;
    assert_eq!(view["recommendation"], Value::Null, "choosing consumes the recommendation");
}

#[tokio::test]
async fn errors_map_to_statuses() {
    let app = app_with("e").await;
    assert_eq!(call(&app, "GET", "/sessions/missing", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/missing/recommendation", None).await.0, StatusCode::NOT_FOUND);

    let (status, err) = call(&app, "POST", "/sessions/e/choose", Some(json!({ "change": "remove:0" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, view) = call(&app, "GET", "/sessions/e", None).await;
    assert_eq!(err["legal_changes"], view["legal_changes"]);
    let (status, _) = call(&app, "POST", "/sessions/e/choose", Some(json!({ "change": "add:999" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    assert_eq!(raw(&app, "POST", "/sessions/e/choose", "{not json").await, StatusCode::BAD_REQUEST);
    assert_eq!(raw(&app, "POST", "/sessions/e/choose", r#"{"change":"jump:3"}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(raw(&app, "POST", "/sessions/e/choose", r#"{"change":"add:1","x":1}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(raw(&app, "POST", "/sessions", r#"{"generate":{"n_pois":0}}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(
        raw(&app, "POST", "/sessions", r#"{"generate":{},"city_file":"x.json"}"#).await,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(raw(&app, "POST", "/sessions", r#"{"session_id":"../etc"}"#).await, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/sessions", Some(small_session("e"))).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, "GET", "/sessions/e/whatif", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "GET", "/sessions/e/whatif?change=remove:1", None).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn request_ids_make_choices_idempotent() {
    let app = app_with("i").await;
    let (_, view) = call(&app, "GET", "/sessions/i", None).await;
    let body = json!({ "change": first_add(&view), "request_id": "req-1" });
    let (_, first) = call(&app, "POST", "/sessions/i/choose", Some(body.clone())).await;
    let (status, second) = call(&app, "POST", "/sessions/i/choose", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first, second);
    assert_eq!(second["iteration"], 1);
}

#[tokio::test]
async fn whatif_reports_deltas() {
    let app = app_with("w").await;
    let (_, city) = call(&app, "GET", "/sessions/w/city", None).await;
    let (_, view) = call(&app, "GET", "/sessions/w", None).await;
    let add = first_add(&view);
    let poi: usize = add[4..].parse().unwrap();
    let (status, report) = call(&app, "GET", &format!("/sessions/w/whatif?change={add}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["outcome_deltas"]["total_cost"], city["pois"][poi]["entry_cost"]);
    let (_, noop) = call(&app, "GET", "/sessions/w/whatif?change=noop", None).await;
    assert_eq!(noop["expected_utility_delta"], 0.0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_choices_serialize() {
    let app = app_with("c").await;
    let (_, view) = call(&app, "GET", "/sessions/c", None).await;
    let adds: Vec<Value> = view["legal_changes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["kind"] == "add")
        .take(2)
        .cloned()
        .collect();
    let (a, b) = tokio::join!(
        call(&app, "POST", "/sessions/c/choose", Some(json!({ "change": adds[0] }))),
        call(&app, "POST", "/sessions/c/choose", Some(json!({ "change": adds[1] }))),
    );
    let ok = [a.0, b.0].iter().filter(|s| **s == StatusCode::OK).count();
    let (_, trace) = call(&app, "GET", "/sessions/c/trace", None).await;
    assert_eq!(trace["history"].as_array().unwrap().len(), ok);
    let seqs: Vec<u64> = trace["events"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>());
}

#[tokio::test]
async fn event_logs_restore_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(Some(dir.path().to_path_buf())));
    let app = router(state);
    call(&app, "POST", "/sessions", Some(small_session("log"))).await;
    call(&app, "GET", "/sessions/log/recommendation", None).await;
    let (_, view) = call(&app, "GET", "/sessions/log", None).await;
    call(&app, "POST", "/sessions/log/choose", Some(json!({ "change": first_add(&view), "request_id": "a" }))).await;
    let (_, live) = call(&app, "GET", "/sessions/log", None).await;
    let (_, live_trace) = call(&app, "GET", "/sessions/log/trace", None).await;

    let restored = Arc::new(AppState::new(Some(dir.path().to_path_buf())));
    assert_eq!(restored.restore().unwrap(), 1);
    let app2 = router(restored);
    let (_, view2) = call(&app2, "GET", "/sessions/log", None).await;
    assert_eq!(view2, live);
    assert_eq!(call(&app2, "GET", "/sessions/log/trace", None).await.1, live_trace);

    // the restored session keeps logging where the original stopped
    let add = first_add(&view2);
    call(&app2, "POST", "/sessions/log/choose", Some(json!({ "change": add }))).await;
    let (_, after) = call(&app2, "GET", "/sessions/log", None).await;
    let again = Arc::new(AppState::new(Some(dir.path().to_path_buf())));
    again.restore().unwrap();
    assert_eq!(call(&router(again), "GET", "/sessions/log", None).await.1, after);
}
