use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use coevo_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn case_session() -> (Router, String) {
    let app = router(AppState::new());
    let (status, body) = post(&app, "/sessions", json!({"preset": "case"})).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["id"].as_str().unwrap().to_string();
    (app, id)
}

fn operation<'a>(ops: &'a Value, name: &str) -> &'a Value {
    ops["operations"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["name"] == name)
        .unwrap_or_else(|| panic!("no operation {name}"))
}

#[tokio::test]
async fn case_preset_session() {
    let (app, id) = case_session().await;
    let (status, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["revision"], 0);
    assert_eq!(s["metamodelNames"], json!(["java", "sm"]));
    assert_eq!(s["records"], 9);
    assert_eq!(s["models"], json!(["program.java"]));

    let (status, mm) = get(&app, &format!("/sessions/{id}/metamodels")).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<&str> = mm["metamodels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["java", "sm"]);
}

#[tokio::test]
async fn sessions_get_distinct_ids() {
    let app = router(AppState::new());
    let (_, a) = post(&app, "/sessions", json!({"preset": "case"})).await;
    let (_, b) = post(&app, "/sessions", json!({"preset": "case"})).await;
    assert_ne!(a["id"], b["id"]);
}

#[tokio::test]
async fn empty_selection_lists_every_operation_unbound() {
    let (app, id) = case_session().await;
    let (status, ops) = get(&app, &format!("/sessions/{id}/operations")).await;
    assert_eq!(status, StatusCode::OK);
    let list = ops["operations"].as_array().unwrap();
    assert_eq!(list.len(), 7);
    for op in list {
        assert_eq!(op["bindings"], json!({}), "{}", op["name"]);
        assert!(op["parameters"].is_array());
    }
}

#[tokio::test]
async fn string_attribute_is_not_an_enum() {
    let (app, id) = case_session().await;
    let (_, ops) = get(
        &app,
        &format!("/sessions/{id}/operations?selection=java.java.Class.name"),
    )
    .await;
    let op = operation(&ops, "enumToSubclasses");
    assert_eq!(op["bindings"]["attribute"], "java.java.Class.name");
    assert_eq!(op["applicable"], false);
    let messages: Vec<&str> = op["messages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap())
        .collect();
    assert!(messages.iter().any(|m| m.starts_with("C1: ")), "{messages:?}");
}

#[tokio::test]
async fn enum_attribute_can_become_subclasses() {
    let (app, id) = case_session().await;
    let (_, ops) = get(
        &app,
        &format!("/sessions/{id}/operations?selection=java.java.Method.visibility"),
    )
    .await;
    let op = operation(&ops, "enumToSubclasses");
    assert_eq!(op["bindings"]["attribute"], "java.java.Method.visibility");
    assert_eq!(op["applicable"], true, "{}", op["messages"]);
    assert_eq!(op["messages"], json!([]));
}

#[tokio::test]
async fn apply_bumps_revision_and_grows_history() {
    let (app, id) = case_session().await;
    let (status, r) = post(
        &app,
        &format!("/sessions/{id}/operations/rename"),
        json!({"revision": 0, "bindings": {"element": "java.java.Class", "newName": "Type"}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert_eq!(r["revision"], 1);
    let (_, h) = get(&app, &format!("/sessions/{id}/history")).await;
    assert_eq!(h["records"], 10);
    assert_eq!(h["revision"], 1);
    let releases = h["releases"].as_array().unwrap();
    assert_eq!(releases[0]["sealed"], true);
    assert_eq!(releases.last().unwrap()["sealed"], false);
    assert_eq!(releases.last().unwrap()["records"].as_array().unwrap().len(), 1);
    let (_, mm) = get(&app, &format!("/sessions/{id}/metamodels")).await;
    assert!(mm.to_string().contains("\"Type\""));
}

#[tokio::test]
async fn stale_revision_is_a_conflict() {
    let (app, id) = case_session().await;
    let ok = json!({"revision": 0, "bindings": {"element": "java.java.Class", "newName": "Type"}});
    assert_eq!(
        post(&app, &format!("/sessions/{id}/operations/rename"), ok).await.0,
        StatusCode::OK
    );
    let stale = json!({"revision": 0, "bindings": {"element": "java.java.Method", "newName": "Function"}});
    let (status, body) = post(&app, &format!("/sessions/{id}/operations/rename"), stale).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "conflict");
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["revision"], 1);
    assert_eq!(s["records"], 10);
    let (status, _) = post(&app, &format!("/sessions/{id}/release"), json!({"revision": 7})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn constraint_failure_leaves_the_session_alone() {
    let (app, id) = case_session().await;
    let (_, before) = get(&app, &format!("/sessions/{id}/history")).await;
    let (status, body) = post(
        &app,
        &format!("/sessions/{id}/operations/enumToSubclasses"),
        json!({"revision": 0, "bindings": {"class": "java.java.Class", "attribute": "java.java.Class.name"}}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "constraints");
    let messages = body["messages"].as_array().unwrap();
    assert!(
        messages.iter().any(|m| m.as_str().unwrap().starts_with("C1: ")),
        "{body}"
    );
    let (_, after) = get(&app, &format!("/sessions/{id}/history")).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn missing_binding_is_reported() {
    let (app, id) = case_session().await;
    let (status, body) = post(
        &app,
        &format!("/sessions/{id}/operations/deleteFeature"),
        json!({"revision": 0, "bindings": {}}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "bindings");
    assert!(!body["messages"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn enum_split_through_the_api() {
    let (app, id) = case_session().await;
    let (status, body) = post(
        &app,
        &format!("/sessions/{id}/operations/enumToSubclasses"),
        json!({"revision": 0, "bindings": {"class": "java.java.Method", "attribute": "java.java.Method.visibility"}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 1);
    let (_, h) = get(&app, &format!("/sessions/{id}/history")).await;
    assert_eq!(h["records"], 10);
    let (_, mm) = get(&app, &format!("/sessions/{id}/metamodels")).await;
    let text = mm.to_string();
    assert!(text.contains("\"PRIVATE\""));
    assert!(!text.contains("\"Visibility\""));
    let (status, out) = post(&app, &format!("/sessions/{id}/migrate"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert!(out.to_string().contains("java.java.PUBLIC"));
}

#[tokio::test]
async fn release_seals_the_open_release() {
    let (app, id) = case_session().await;
    post(
        &app,
        &format!("/sessions/{id}/operations/rename"),
        json!({"revision": 0, "bindings": {"element": "java.java.Class", "newName": "Type"}}),
    )
    .await;
    let (status, h) = post(&app, &format!("/sessions/{id}/release"), json!({"revision": 1})).await;
    assert_eq!(status, StatusCode::OK, "{h}");
    assert_eq!(h["revision"], 2);
    let releases = h["releases"].as_array().unwrap();
    assert_eq!(releases.len(), 3);
    assert_eq!(releases[1]["sealed"], true);
    assert_eq!(releases[1]["records"].as_array().unwrap().len(), 1);
    assert_eq!(releases[2]["sealed"], false);
    assert_eq!(releases[2]["records"], json!([]));
}

#[tokio::test]
async fn migrate_reports_step_timings() {
    let (app, id) = case_session().await;
    let (status, out) = post(&app, &format!("/sessions/{id}/migrate"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    let steps = out["report"]["steps"].as_array().unwrap();
    let names: Vec<&str> = steps.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        [
            "ExtractStates",
            "ExtractTransitions",
            "ExtractTriggers",
            "ExtractActions",
            "PrintTime"
        ]
    );
    assert!(steps.iter().all(|s| s["millis"].as_f64().unwrap() >= 0.0));
    let lines = out["report"]["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 5);
    for (line, step) in lines.iter().zip(&names[..4]) {
        assert!(line.as_str().unwrap().starts_with(&format!("step {step} ")), "{line}");
    }
    assert!(lines[4].as_str().unwrap().starts_with("total "));
    assert_eq!(out["models"].as_array().unwrap().len(), 1);
    assert_eq!(out["revision"], 0);

    let (status, _) = post(&app, &format!("/sessions/{id}/migrate"), json!({"model": "nowhere"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn save_writes_the_history() {
    let (app, id) = case_session().await;
    let dir = std::env::temp_dir().join(format!("coevo-service-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("history.json");
    let (status, body) = post(&app, &format!("/sessions/{id}/save"), json!({"path": path})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body["bytes"], text.len());
    let written: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(written, body["history"]);

    let (status, reloaded) = post(&app, "/sessions", json!({"history": written})).await;
    assert_eq!(status, StatusCode::CREATED, "{reloaded}");
    assert_eq!(reloaded["records"], 9);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[tokio::test]
async fn fresh_session_from_metamodels() {
    let (app, id) = case_session().await;
    let (_, mm) = get(&app, &format!("/sessions/{id}/metamodels")).await;
    let (status, s) = post(&app, "/sessions", json!({"metamodels": mm["metamodels"]})).await;
    assert_eq!(status, StatusCode::CREATED, "{s}");
    assert_eq!(s["records"], 0);
    assert_eq!(s["releases"], 1);
}

#[tokio::test]
async fn bad_session_bodies() {
    let app = router(AppState::new());
    let (status, body) = post(&app, "/sessions", json!({})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid-session");
    let (status, _) = post(&app, "/sessions", json!({"preset": "nope"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_session_and_operation() {
    let (app, id) = case_session().await;
    let (status, body) = get(&app, "/sessions/s999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not-found");
    let (status, _) = get(&app, "/sessions/s999/history").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = post(
        &app,
        &format!("/sessions/{id}/operations/explode"),
        json!({"revision": 0, "bindings": {}}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown-operation");
    let (_, s) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(s["revision"], 0);
}
