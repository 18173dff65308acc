use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use prefstack::infer::{Engine, Session};
use prefstack::io::{load_model, save_model};
use prefstack::train::PreferenceModel;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Models are loaded from and saved to `<dir>/<model_id>.json`.
    pub model_dir: Option<PathBuf>,
    /// Default for sessions that do not choose: a primary posted while
    /// feedback is pending resolves it instead of failing with 409.
    pub auto_resolve: bool,
    /// Seed of sessions created without one.
    pub default_seed: u64,
}

pub struct ApiSession {
    pub model_id: String,
    pub session: Session,
    pub auto_resolve: bool,
    pub created_at_ms: u64,
    pub last_event_at_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Models and sessions held in memory. Each session sits behind its own
/// mutex so requests to one session are serialized while different
/// sessions proceed independently.
pub struct AppState {
    pub config: ServiceConfig,
    models: RwLock<HashMap<String, Arc<Engine>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<ApiSession>>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> anyhow::Result<Self> {
        let state = Self {
            config,
            models: RwLock::default(),
            sessions: RwLock::default(),
        };
        if let Some(dir) = state.config.model_dir.clone() {
            state.load_dir(&dir)?;
        }
        Ok(state)
    }

    fn load_dir(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating model directory {}", dir.display()))?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let model = load_model(&path).with_context(|| format!("loading {}", path.display()))?;
            tracing::info!(model_id = id, "loaded model");
            self.models
                .write()
                .unwrap()
                .insert(id.to_string(), Arc::new(Engine::new(model)?));
        }
        Ok(())
    }

    pub fn insert_model(&self, id: String, model: PreferenceModel) -> anyhow::Result<Arc<Engine>> {
        if let Some(dir) = &self.config.model_dir {
            save_model(dir.join(format!("{id}.json")), &model)?;
        }
        let engine = Arc::new(Engine::new(model)?);
        self.models.write().unwrap().insert(id, Arc::clone(&engine));
        Ok(engine)
    }

    pub fn model(&self, id: &str) -> Option<Arc<Engine>> {
        self.models.read().unwrap().get(id).cloned()
    }

    pub fn model_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.models.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn insert_session(&self, id: String, session: ApiSession) {
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(session)));
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<ApiSession>>> {
        self.sessions.read().unwrap().get(id).cloned()
    }
}
