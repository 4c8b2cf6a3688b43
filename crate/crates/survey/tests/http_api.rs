mod common;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::*;
use distill_core::stats::read_ratings_csv;
use distill_survey::{router, AppState, SurveyService};

const TOKEN: &str = "operator-secret";

fn app() -> Router {
    router(AppState::new(SurveyService::in_memory(pool(), 21), TOKEN))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header(header::CONTENT_TYPE, "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body, None).await;
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

async fn run_participant(app: &Router, participant: &str, k: usize) -> String {
    let (status, created) = json_call(app, Method::POST, "/sessions", Some(json!({ "participant_id": participant }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["total_items"], 13);
    let id = created["session_id"].as_str().unwrap().to_string();
    let mut seen = 0;
    loop {
        let (status, next) = json_call(app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        if next["done"] == true {
            break;
        }
        let item = &next["item"];
        assert!(item.get("variant").is_none());
        let item_id = item["item_id"].as_str().unwrap();
        let v = answer_value(item_id, k, next["position"].as_u64().unwrap() as usize);
        let (status, _) = json_call(
            app,
            Method::POST,
            &format!("/sessions/{id}/ratings"),
            Some(serde_json::to_value(rating(item_id, v)).unwrap()),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        seen += 1;
    }
    assert_eq!(seen, 13);
    let (status, _) = json_call(
        app,
        Method::POST,
        &format!("/sessions/{id}/demographics"),
        Some(serde_json::to_value(demographics(k)).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    id
}

#[tokio::test]
async fn export_requires_operator_token() {
    let app = app();
    let (status, body) = call(&app, Method::GET, "/export.csv", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["error"], "unauthorized");
    let (status, _) = call(&app, Method::GET, "/export.csv", None, Some("wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, body) = call(&app, Method::GET, "/export.csv", None, Some(TOKEN)).await;
    assert_eq!(status, StatusCode::OK);
    assert!(read_ratings_csv(&body[..]).unwrap().is_empty());
}

#[tokio::test]
async fn empty_operator_token_never_authorizes() {
    let app = router(AppState::new(SurveyService::in_memory(pool(), 21), ""));
    let (status, _) = call(&app, Method::GET, "/export.csv", None, Some("")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn k_117_sessions_export_1404_rows() {
    let app = app();
    for i in 0..117 {
        run_participant(&app, &format!("prolific-{i:03}"), i).await;
    }
    let (status, body) = call(&app, Method::GET, "/export.csv", None, Some(TOKEN)).await;
    assert_eq!(status, StatusCode::OK);
    let rows = read_ratings_csv(&body[..]).unwrap();
    assert_eq!(rows.len(), 1404);
    let mut rewritten = Vec::new();
    distill_core::stats::write_ratings_csv(&mut rewritten, &rows).unwrap();
    assert_eq!(rewritten, body);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (status, body) = json_call(&app, Method::GET, "/sessions/missing/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (_, created) = json_call(&app, Method::POST, "/sessions", Some(json!({ "participant_id": "p" }))).await;
    let (status, body) = json_call(&app, Method::POST, "/sessions", Some(json!({ "participant_id": "p" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "duplicate_participant");

    let id = created["session_id"].as_str().unwrap();
    let (_, next) = json_call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    let item_id = next["item"]["item_id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/ratings");

    let (status, body) = json_call(&app, Method::POST, &uri, Some(serde_json::to_value(rating(item_id, 7)).unwrap())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "out_of_range");

    let (status, body) = json_call(&app, Method::POST, &uri, Some(serde_json::to_value(rating("zzz", 3)).unwrap())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_item");

    let (status, _) = json_call(&app, Method::POST, &uri, Some(serde_json::to_value(rating(item_id, 3)).unwrap())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = json_call(&app, Method::POST, &uri, Some(serde_json::to_value(rating(item_id, 3)).unwrap())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "duplicate_rating");

    let (status, body) = json_call(&app, Method::POST, &uri, Some(json!({ "item_id": item_id }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "bad_request");
}

#[tokio::test]
async fn failed_attention_check_closes_session() {
    let app = app();
    let (_, created) = json_call(&app, Method::POST, "/sessions", Some(json!({ "participant_id": "x" }))).await;
    let id = created["session_id"].as_str().unwrap();
    loop {
        let (_, next) = json_call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        let item_id = next["item"]["item_id"].as_str().unwrap().to_string();
        let (status, body) = json_call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/ratings"),
            Some(serde_json::to_value(rating(&item_id, 5)).unwrap()),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        if item_id == "attention-check" {
            assert_eq!(body["status"], "excluded");
            break;
        }
        assert_eq!(body["status"], "in_progress");
    }
    let (status, body) = json_call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "session_closed");
}
