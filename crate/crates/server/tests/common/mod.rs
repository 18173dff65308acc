#![allow(dead_code)]

use std::sync::Arc;

use prefstack::io::DemoFile;
use prefstack::synth::{bookcase_task, fig4_like, generate};
use prefstack::{Demonstration, TaskDefinition};
use prefstack_server::{router, AppState, ServiceConfig};
use serde_json::{json, Value};

pub const CORPUS_SEED: u64 = 11;

pub fn corpus() -> (TaskDefinition, Vec<Demonstration>) {
    let task = bookcase_task();
    let demos = generate(&fig4_like(), &task, CORPUS_SEED).unwrap().demos;
    (task, demos)
}

pub fn upload_body(task: &TaskDefinition, demos: &[Demonstration], model_id: Option<&str>) -> Value {
    let files: Vec<DemoFile> = demos.iter().map(DemoFile::from_demonstration).collect();
    let mut body = json!({ "task": task, "demos": files });
    if let Some(id) = model_id {
        body["model_id"] = json!(id);
    }
    body
}

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    pub state: Arc<AppState>,
}

impl Server {
    pub async fn start(config: ServiceConfig) -> Self {
        let state = Arc::new(AppState::new(config).unwrap());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = router(Arc::clone(&state));
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        Self {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            state,
        }
    }

    pub async fn auto() -> Self {
        Self::start(ServiceConfig {
            auto_resolve: true,
            ..Default::default()
        })
        .await
    }

    pub async fn strict() -> Self {
        Self::start(ServiceConfig::default()).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self
            .client
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    /// Uploads the fig4-like corpus and returns the model id.
    pub async fn upload_fig4(&self, model_id: Option<&str>) -> String {
        let (task, demos) = corpus();
        let (status, body) = self.post("/v1/models", &upload_body(&task, &demos, model_id)).await;
        assert_eq!(status, 201, "{body}");
        body["model_id"].as_str().unwrap().to_string()
    }

    pub async fn session(&self, model_id: &str, seed: u64) -> (String, Value) {
        let (status, body) = self
            .post("/v1/sessions", &json!({ "model_id": model_id, "seed": seed }))
            .await;
        assert_eq!(status, 201, "{body}");
        (body["session_id"].as_str().unwrap().to_string(), body)
    }
}

pub fn ids(set: &prefstack::SecondaryActionSet) -> Vec<String> {
    set.iter().map(str::to_string).collect()
}

/// Drives a held-out demonstration through the API the way the library
/// replay does: feedback against the actual set, then the primary.
pub async fn replay_http(
    server: &Server,
    model_id: &str,
    demo: &Demonstration,
    seed: u64,
) -> Vec<prefstack::SecondaryActionSet> {
    let (sid, created) = server.session(model_id, seed).await;
    let mut current: prefstack::SecondaryActionSet =
        serde_json::from_value(created["initial_prediction"].clone()).unwrap();
    let mut predicted = Vec::with_capacity(demo.steps.len());
    for step in &demo.steps {
        let accepted = current == step.secondary;
        let (status, body) = server
            .post(
                &format!("/v1/sessions/{sid}/feedback"),
                &json!({ "accepted": accepted, "actual": ids(&step.secondary) }),
            )
            .await;
        assert_eq!(status, 200, "{body}");
        let (status, body) = server
            .post(
                &format!("/v1/sessions/{sid}/primary"),
                &json!({ "action_id": step.primary }),
            )
            .await;
        assert_eq!(status, 200, "{body}");
        predicted.push(std::mem::replace(
            &mut current,
            serde_json::from_value(body["prediction"].clone()).unwrap(),
        ));
    }
    predicted
}
