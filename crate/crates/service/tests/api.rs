use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use journey_core::fixture::{survey, SURVEY_CSV};
use journey_service::{build_router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with_fixture() -> (AppState, Router) {
    let state = AppState::new(Some(survey().unwrap()));
    (state.clone(), build_router(state))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value, bytes)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn post_text(uri: &str, body: &str) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "text/csv")
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::test]
async fn health_and_stats() {
    let (_, app) = app_with_fixture();
    let (status, body, _) = send(&app, get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["journeys"], 104);
    let (status, body, _) = send(&app, get("/api/stats")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["stats"]["purchases"], 86);
    assert_eq!(body["cooccurrence"]["symbols"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn upload_cases() {
    let app = build_router(AppState::default());
    let (status, _, _) = send(&app, get("/api/clusters")).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body, _) = send(&app, post_text("/api/dataset", SURVEY_CSV)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["accepted"], 104);
    assert_eq!(body["version"], 1);

    let (status, body, _) = send(&app, post_text("/api/dataset", "x1,m\nx2,c,e\n")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["report"]["accepted"], 0);

    let jsonl = Request::post("/api/dataset")
        .header("content-type", "application/x-ndjson")
        .body(Body::from("{\"id\": 3}\n"))
        .unwrap();
    let (status, _, _) = send(&app, jsonl).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // the rejected uploads left version 1 in place
    let (_, body, _) = send(&app, get("/api/health")).await;
    assert_eq!(body["dataset_version"], 1);
}

#[tokio::test]
async fn clusters_and_embedding() {
    let (state, app) = app_with_fixture();
    let uri = "/api/clusters?k=6&w1=2&w2=1&w3=10&seed=3";
    let (status, body, first) = send(&app, get(uri)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["medoids"].as_array().unwrap().len(), 6);
    let sizes: u64 = body["sizes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(sizes, 104);
    let (_, _, second) = send(&app, get(uri)).await;
    assert_eq!(first, second);

    let (status, _, _) = send(&app, get("/api/clusters?k=0")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = send(&app, get("/api/clusters?w1=-1")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body, first) = send(&app, get("/api/embedding?k=4&kernel=dl")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["xy"].as_array().unwrap().len(), 104);
    assert_eq!(body["clusters"].as_array().unwrap().len(), 104);
    assert_eq!(body["outcomes"].as_array().unwrap().len(), 104);
    let (_, _, second) = send(&app, get("/api/embedding?k=4&kernel=dl")).await;
    assert_eq!(first, second);
    let (status, _, _) = send(&app, get("/api/embedding?k=200")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(state.cached_matrices(), 2);
}

#[tokio::test]
async fn matrix_cache_is_bounded() {
    let (state, app) = app_with_fixture();
    for w3 in 1..=12 {
        let (status, _, _) = send(&app, get(&format!("/api/clusters?k=2&w3={w3}"))).await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(state.cached_matrices(), journey_service::state::MATRIX_CACHE_CAPACITY);
}

#[tokio::test]
async fn predict_cases() {
    let (_, app) = app_with_fixture();
    let (status, body, _) = send(&app, post_json("/api/predict", json!({"items": ["d", "g", "h"], "k": 1}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["neighbors"].as_array().unwrap().len(), 1);
    assert_eq!(body["neighbors"][0]["distance"], 0.0);
    assert_eq!(body["y_hat"], 0.0);
    assert_eq!(body["label"], 0);

    let (status, body, _) = send(&app, post_json("/api/predict", json!({"items": ["e", "c"]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["reason"], "IllegalTransition");

    let (status, _, _) = send(&app, post_json("/api/predict", json!({"items": ["c"], "k": 105}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn counterfactual_cases() {
    let (_, app) = app_with_fixture();
    let req = json!({"items": ["c", "c", "e", "g", "0"], "y_obj": 1, "lambda": 1.0, "w1": "2", "w2": "1"});
    let (status, body, _) = send(&app, post_json("/api/counterfactual", req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["narrative"], json!(["replace st1 item 2: c → b"]));
    assert_eq!(body["counterfactual"]["id"], "r001");
    assert!(body.get("warning").is_none());

    let req = json!({"items": ["c"], "y_obj": 1, "lambda": -0.5});
    let (status, _, _) = send(&app, post_json("/api/counterfactual", req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let all_buy = build_router(AppState::default());
    send(&all_buy, post_text("/api/dataset", "p1,c,i\np2,d,g,j\np3,b,i\n")).await;
    let req = json!({"items": ["c", "e"], "y_obj": 0, "lambda": 0.01});
    let (status, body, _) = send(&all_buy, post_json("/api/counterfactual", req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["loss"], 1.0);
    assert!(body["warning"].is_string());
}

#[tokio::test]
async fn snapshots_are_isolated() {
    let (state, app) = app_with_fixture();
    let before = state.snapshot();
    let (status, _, _) = send(&app, post_text("/api/dataset", "n1,c,i\nn2,d,k\nn3,b,e,i\n")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before.dataset.as_ref().unwrap().len(), 104);
    assert_eq!(state.snapshot().dataset.as_ref().unwrap().len(), 3);
    assert_eq!(state.snapshot().version, before.version + 1);

    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            if i % 4 == 0 {
                send(&app, post_text("/api/dataset", SURVEY_CSV)).await.0
            } else {
                let (status, body, _) = send(&app, get("/api/embedding?k=2")).await;
                let n = body["xy"].as_array().map_or(0, Vec::len);
                assert!(n == 3 || n == 104, "torn read: {n}");
                assert_eq!(body["clusters"].as_array().map_or(0, Vec::len), n);
                status
            }
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
}

#[tokio::test]
async fn persistence_round_trip() {
    let dir = std::env::temp_dir().join(format!("journeys-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("snapshot.jsonl");
    let _ = std::fs::remove_file(&path);
    let state = AppState::with_persistence(None, &path).unwrap();
    let app = build_router(state);
    send(&app, post_text("/api/dataset", SURVEY_CSV)).await;
    let restored = AppState::with_persistence(None, &path).unwrap();
    assert_eq!(restored.snapshot().dataset.as_ref().unwrap().len(), 104);
    std::fs::remove_dir_all(dir).unwrap();
}
