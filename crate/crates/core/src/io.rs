//! JSON files for tasks, demonstrations, models and generated corpora.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonicalize, to_timesteps, Action, ActionKind, Demonstration, TaskDefinition};
use crate::train::{PreferenceModel, SCHEMA_VERSION};

fn current_schema() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskFile {
    #[serde(default = "current_schema")]
    schema_version: u32,
    #[serde(flatten)]
    task: TaskDefinition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: ActionKind,
}

/// On-disk demonstration: the raw, unsegmented action log of one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoFile {
    #[serde(default = "current_schema")]
    pub schema_version: u32,
    pub user_id: String,
    pub actions: Vec<RawAction>,
}

impl DemoFile {
    pub fn from_demonstration(demo: &Demonstration) -> Self {
        let actions = demo
            .flatten()
            .into_iter()
            .map(|a| RawAction {
                id: a.id().map(str::to_string),
                kind: a.kind(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            user_id: demo.user_id.clone(),
            actions,
        }
    }

    /// Canonicalizes every action against `task` and folds the log into
    /// time steps.
    pub fn into_demonstration(self, task: &TaskDefinition) -> Result<Demonstration> {
        check_schema(self.schema_version)?;
        let mut raw = Vec::with_capacity(self.actions.len());
        for (i, a) in self.actions.iter().enumerate() {
            let action = match (a.kind, &a.id) {
                (ActionKind::Noop, _) => Action::Noop,
                (kind, Some(id)) => {
                    let c = canonicalize(id, task)?;
                    if c.kind() != kind {
                        return Err(Error::WrongKind {
                            id: id.clone(),
                            expected: kind,
                            found: c.kind(),
                        });
                    }
                    c
                }
                (_, None) => {
                    return Err(Error::InvalidDemonstration(format!(
                        "actions[{i}] of `{}` has no id",
                        self.user_id
                    )))
                }
            };
            raw.push(action);
        }
        to_timesteps(self.user_id, &raw)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}

/// Parses JSON text, reporting the line and column of the first problem.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("model types serialize");
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_task(path: impl AsRef<Path>) -> Result<TaskDefinition> {
    let file: TaskFile = read_json(path.as_ref())?;
    check_schema(file.schema_version)?;
    file.task.check()?;
    Ok(file.task)
}

pub fn save_task(path: impl AsRef<Path>, task: &TaskDefinition) -> Result<()> {
    write_json(
        path.as_ref(),
        &TaskFile {
            schema_version: SCHEMA_VERSION,
            task: task.clone(),
        },
    )
}

pub fn load_demo(path: impl AsRef<Path>, task: &TaskDefinition) -> Result<Demonstration> {
    let path = path.as_ref();
    let file: DemoFile = read_json(path)?;
    file.into_demonstration(task).map_err(|e| match e {
        Error::Parse { .. } | Error::Io { .. } | Error::SchemaMismatch { .. } => e,
        other => Error::Parse {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

/// Loads every `*.json` file in `dir`, ordered by file name.
pub fn load_demos(dir: impl AsRef<Path>, task: &TaskDefinition) -> Result<Vec<Demonstration>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_demo(p, task)).collect()
}

/// Writes one `<user_id>.json` per demonstration.
pub fn save_demos(dir: impl AsRef<Path>, demos: &[Demonstration]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for d in demos {
        write_json(
            &dir.join(format!("{}.json", d.user_id)),
            &DemoFile::from_demonstration(d),
        )?;
    }
    Ok(())
}

pub fn model_to_string(model: &PreferenceModel) -> String {
    let mut text = serde_json::to_string_pretty(model).expect("model serializes");
    text.push('\n');
    text
}

pub fn model_from_str(text: &str, origin: &str) -> Result<PreferenceModel> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: u32,
    }
    let v: Version = parse_json(text, origin)?;
    check_schema(v.schema_version)?;
    parse_json(text, origin)
}

pub fn save_model(path: impl AsRef<Path>, model: &PreferenceModel) -> Result<()> {
    write_json(path.as_ref(), model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PreferenceModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, &path.display().to_string())
}
