#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use pleasance::config::Config;
use pleasance::presenter::Presenter;
use pleasance::service::{router, AppState, Clock, Store};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const TOKEN: &str = "lab-token";

pub fn counter_clock() -> Clock {
    let t = Arc::new(AtomicU64::new(1_000));
    Arc::new(move || t.fetch_add(10, Ordering::SeqCst))
}

pub fn app_with(dir: &Path, presenter: Presenter, token: Option<&str>) -> (Router, Arc<Store>) {
    let store = Arc::new(Store::open(dir, &Config::default(), presenter, counter_clock()).unwrap());
    let state = AppState { store: store.clone(), experimenter_token: token.map(str::to_string) };
    (router(state), store)
}

pub fn app(dir: &Path) -> Router {
    app_with(dir, Presenter::Log, Some(TOKEN)).0
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body), None).await
}

pub async fn create(app: &Router, seed: u64) -> String {
    let (status, body) = post(app, "/api/sessions", json!({ "seed": seed })).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

/// A scripted participant answering from fixed utilities.
pub struct Script {
    pub utilities: Vec<f64>,
}

impl Script {
    pub fn new(seed: u64) -> Self {
        let utilities = (0..15).map(|i| ((i as u64 * 7 + seed * 3) % 15) as f64 + 0.1 * i as f64).collect();
        Self { utilities }
    }

    fn u(&self, v: &Value) -> f64 {
        self.utilities[v.as_u64().unwrap() as usize]
    }

    fn best<'a>(&self, ids: &'a [Value]) -> &'a Value {
        ids.iter().max_by(|a, b| self.u(a).total_cmp(&self.u(b))).unwrap()
    }

    fn worst<'a>(&self, ids: &'a [Value]) -> &'a Value {
        ids.iter().min_by(|a, b| self.u(a).total_cmp(&self.u(b))).unwrap()
    }

    /// The response body for a prompt returned by `/next`.
    pub fn answer(&self, prompt: &Value, anchors: &mut Option<(f64, f64)>) -> Value {
        let schema = &prompt["response"];
        let stimuli = prompt["stimuli"].as_array().unwrap();
        match schema["kind"].as_str().unwrap() {
            "confirm_familiarization" => json!({ "kind": "confirm_familiarization" }),
            "pick_group_extremes" => json!({
                "kind": "group_extremes",
                "group_index": schema["group_index"],
                "most_pleasant": self.best(stimuli),
                "most_unpleasant": self.worst(stimuli),
            }),
            "pick_anchors" => {
                let best = self.best(schema["pleasant"].as_array().unwrap()).clone();
                let worst = self.worst(schema["unpleasant"].as_array().unwrap()).clone();
                *anchors = Some((self.u(&best), self.u(&worst)));
                json!({ "kind": "anchors", "best": best, "worst": worst })
            }
            "rating" => {
                let (hi, lo) = anchors.unwrap();
                let x = -3.0 + 6.0 * (self.u(&schema["stimulus_id"]) - lo) / (hi - lo);
                json!({ "kind": "rating", "stimulus_id": schema["stimulus_id"], "value": x.round().clamp(-3.0, 3.0) as i64 })
            }
            "forced_choice" => json!({
                "kind": "choice",
                "pair": [stimuli[0], stimuli[1]],
                "winner": self.best(stimuli),
            }),
            other => panic!("unexpected prompt {other}"),
        }
    }
}

/// Answers prompts until the session finishes or `limit` responses were
/// posted. Returns the number of responses posted.
pub async fn drive(app: &Router, id: &str, script: &Script, limit: usize, anchors: &mut Option<(f64, f64)>) -> usize {
    let mut posted = 0;
    while posted < limit {
        let (status, prompt) = get(app, &format!("/api/sessions/{id}/next")).await;
        if status == StatusCode::GONE {
            break;
        }
        assert_eq!(status, StatusCode::OK, "{prompt}");
        let response = script.answer(&prompt, anchors);
        let key = format!("{id}-{}-{}", prompt["phase"].as_str().unwrap(), prompt["progress"]["answered"]);
        let (status, ack) =
            post(app, &format!("/api/sessions/{id}/response"), json!({ "idempotency_key": key, "response": response })).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        posted += 1;
    }
    posted
}
