#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use hypforge_service::store::ModelStore;
use hypforge_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

/// Model whose hypothesis space for the trace (x, y) has exactly 15 members.
pub const FIFTEEN: &str = "default <good>\nA {x, y} -> B\nB {x} -> A\nstart: A";

pub fn app() -> Router {
    app_with(ServiceConfig::default())
}

pub fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(ModelStore::in_memory(), config))
}

pub async fn send(app: &Router, method: Method, uri: &str, content_type: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, content_type)
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    send(app, Method::POST, uri, "application/json", body.to_string()).await
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    send(app, Method::GET, uri, "application/json", Body::empty()).await
}

/// Stores `source` and returns the new model id.
pub async fn create(app: &Router, source: &str) -> String {
    let (status, body) = post_json(app, "/models", json!({ "source": source })).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

/// Requests pages until `has_next` is false or `max` pages were read.
pub async fn pages(app: &Router, id: &str, trace: &[&str], max: usize) -> Vec<Value> {
    let uri = format!("/models/{id}/hypotheses");
    let (status, first) = post_json(app, &uri, json!({ "trace": trace })).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    let mut out = vec![first];
    while out.len() < max && out.last().unwrap()["has_next"] == true {
        let token = out.last().unwrap()["generation_token"].clone();
        let (status, page) = post_json(app, &uri, json!({ "token": token })).await;
        assert_eq!(status, StatusCode::OK, "{page}");
        out.push(page);
    }
    out
}

pub fn shared(config: ServiceConfig) -> (Arc<AppState>, Router) {
    let state = AppState::new(ModelStore::in_memory(), config);
    (state.clone(), router(state))
}
