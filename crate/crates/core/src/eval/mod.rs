//! Leave-one-out evaluation of next-secondary-set prediction.

pub mod baseline;
pub mod stats;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::{self, Engine, Resolution, StepOutcome};
use crate::model::{Demonstration, TaskDefinition};
use crate::train::{train, TrainConfig};

pub use stats::{paired_t_test, TTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoStage,
    EventOnly,
    PrimaryBaseline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::TwoStage, Method::EventOnly, Method::PrimaryBaseline];

    pub fn tag(self) -> &'static str {
        match self {
            Method::TwoStage => "two-stage",
            Method::EventOnly => "event-only",
            Method::PrimaryBaseline => "primary",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "two-stage" => Ok(Method::TwoStage),
            "event-only" => Ok(Method::EventOnly),
            "primary" | "primary-baseline" => Ok(Method::PrimaryBaseline),
            other => Err(format!(
                "unknown method `{other}` (expected two-stage, event-only or primary)"
            )),
        }
    }
}

/// Per-user, per-step, per-trial correctness of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub method: String,
    pub users: Vec<String>,
    /// `correct[user][step][trial]`
    pub correct: Vec<Vec<Vec<bool>>>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean with the sample standard deviation.
fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

impl AccuracyReport {
    pub fn empty(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            users: Vec::new(),
            correct: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.correct.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Accuracy of one user at one step, averaged over trials.
    pub fn cell(&self, user: usize, step: usize) -> Option<f64> {
        let trials = self.correct.get(user)?.get(step)?;
        Some(trials.iter().filter(|&&c| c).count() as f64 / trials.len() as f64)
    }

    /// (mean, standard error) across users at every step.
    pub fn per_timestep(&self) -> Vec<(f64, f64)> {
        (0..self.steps())
            .map(|t| {
                let cells: Vec<f64> = (0..self.users.len()).filter_map(|u| self.cell(u, t)).collect();
                (mean(&cells), stderr(&cells))
            })
            .collect()
    }

    pub fn per_user_means(&self) -> Vec<f64> {
        (0..self.users.len())
            .map(|u| {
                let cells: Vec<f64> = (0..self.correct[u].len())
                    .filter_map(|t| self.cell(u, t))
                    .collect();
                mean(&cells)
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.per_user_means())
    }

    pub fn stderr(&self) -> f64 {
        stderr(&self.per_user_means())
    }
}

/// Seed of the session replaying `user` in `trial`.
pub fn session_seed(seed: u64, trial: usize, user: usize) -> u64 {
    // splitmix64 finalizer over the packed coordinates
    let mut z = seed
        .wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((user as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A method fitted on one training fold: replays a held-out user with a seed.
pub type FoldPredictor = Box<dyn Fn(&Demonstration, u64) -> Result<Vec<StepOutcome>> + Send + Sync>;

/// Generic leave-one-out harness. `fit` is called once per held-out user
/// with the remaining demonstrations; trials only vary the replay seed.
pub fn loocv_with<F>(
    demos: &[Demonstration],
    method: &str,
    trials: usize,
    seed: u64,
    fit: F,
) -> Result<AccuracyReport>
where
    F: Fn(&[Demonstration]) -> Result<FoldPredictor> + Sync,
{
    if demos.len() < 3 {
        return Err(Error::TooFewUsers {
            needed: 3,
            got: demos.len(),
        });
    }
    if trials == 0 {
        return Err(Error::DegenerateInput("trials must be at least 1".into()));
    }
    let correct = (0..demos.len())
        .into_par_iter()
        .map(|held| {
            let training: Vec<Demonstration> = demos
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != held)
                .map(|(_, d)| d.clone())
                .collect();
            let predictor = fit(&training)?;
            let demo = &demos[held];
            let mut grid = vec![Vec::with_capacity(trials); demo.steps.len()];
            for trial in 0..trials {
                let outcomes = predictor(demo, session_seed(seed, trial, held))?;
                for (cell, o) in grid.iter_mut().zip(outcomes) {
                    cell.push(o.correct());
                }
            }
            Ok(grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AccuracyReport {
        method: method.to_string(),
        users: demos.iter().map(|d| d.user_id.clone()).collect(),
        correct,
    })
}

/// Leave-one-out cross-validation of one method.
pub fn loocv(
    demos: &[Demonstration],
    task: &TaskDefinition,
    method: Method,
    trials: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<AccuracyReport> {
    loocv_with(demos, method.tag(), trials, seed, |training| {
        fit(training, task, method, config)
    })
}

fn fit(
    training: &[Demonstration],
    task: &TaskDefinition,
    method: Method,
    config: &TrainConfig,
) -> Result<FoldPredictor> {
    Ok(match method {
        Method::TwoStage | Method::EventOnly => {
            let resolution = if method == Method::TwoStage {
                Resolution::TwoStage
            } else {
                Resolution::EventOnly
            };
            let engine = Arc::new(Engine::new(train(training, task, config)?)?);
            Box::new(move |demo, seed| infer::replay(&engine, demo, resolution, seed))
        }
        Method::PrimaryBaseline => {
            let model = baseline::train_primary(training, config)?;
            Box::new(move |demo, seed| Ok(baseline::replay(&model, demo, seed)))
        }
    })
}

/// Per-step mean accuracy of each report as CSV
/// (`timestep,method,mean,stderr`), steps numbered from 1.
pub fn report_csv(reports: &[AccuracyReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(["timestep", "method", "mean", "stderr"])
        .map_err(csv_err)?;
    for r in reports {
        for (t, (m, se)) in r.per_timestep().into_iter().enumerate() {
            w.write_record([
                (t + 1).to_string(),
                r.method.clone(),
                format!("{m:.6}"),
                format!("{se:.6}"),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn export_report(reports: &[AccuracyReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_csv(reports)?).map_err(|e| Error::io(path, e))
}
