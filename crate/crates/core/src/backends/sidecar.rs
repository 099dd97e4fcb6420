use std::sync::Arc;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value as JsonValue};

use super::{run_stub, BackendError, ImageSink, ProviderCall, Registry, RemoteRequest, RemoteResponse};
use crate::dsl::print_program;
use crate::planner::{match_template_ungrounded, Exemplar};

/// Serve one protocol request with the in-process stubs.
pub fn handle_request(registry: &Registry, req: &RemoteRequest) -> RemoteResponse {
    let outcome = ProviderCall::from_request(req).and_then(|call| run_stub(&call, registry.labels()));
    match outcome {
        Ok(value) => {
            let mut sink = ImageSink::default();
            let result = sink.value("out", &value);
            RemoteResponse::success(result, sink.images)
        }
        Err(e) => RemoteResponse::failure(e.to_string()),
    }
}

/// Planner requests: an exemplar with the same instruction wins, otherwise
/// the templates are matched without grounding.
fn handle_planner(body: &JsonValue) -> JsonValue {
    let instruction = body.get("instruction").and_then(JsonValue::as_str).unwrap_or_default();
    let exemplars: Vec<Exemplar> =
        body.get("exemplars").and_then(|e| serde_json::from_value(e.clone()).ok()).unwrap_or_default();
    if let Some(e) = exemplars.iter().find(|e| e.instruction.eq_ignore_ascii_case(instruction.trim())) {
        return json!({ "program": e.program });
    }
    match match_template_ungrounded(instruction, (100, 100)) {
        Ok((_, program)) => json!({ "program": print_program(&program) }),
        Err(e) => json!({ "program": "", "error": e.to_string() }),
    }
}

/// `POST /invoke` served by stubs, for loopback testing and as a template
/// for real model sidecars.
pub fn sidecar_router(registry: Registry) -> Router {
    Router::new().route("/invoke", post(invoke_handler)).with_state(Arc::new(registry))
}

async fn invoke_handler(State(registry): State<Arc<Registry>>, Json(body): Json<JsonValue>) -> Json<JsonValue> {
    if body.get("role").and_then(JsonValue::as_str) == Some("planner") {
        return Json(handle_planner(&body));
    }
    let resp = match serde_json::from_value::<RemoteRequest>(body) {
        Ok(req) => tokio::task::spawn_blocking(move || handle_request(&registry, &req))
            .await
            .unwrap_or_else(|e| RemoteResponse::failure(e.to_string())),
        Err(e) => RemoteResponse::failure(BackendError::ProtocolError(e.to_string()).to_string()),
    };
    Json(serde_json::to_value(resp).expect("response serializes"))
}
