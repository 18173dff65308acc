//! One-stage baseline: users clustered on their raw primary-action
//! sequences; the next secondary set is the modal one among the committed
//! cluster's members at the same time step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::cluster;
use crate::distance::distance_matrix;
use crate::error::{Error, Result};
use crate::infer::{commit, modal_set, StepOutcome};
use crate::model::{Demonstration, SecondaryActionSet};
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryCluster {
    pub members: Vec<Demonstration>,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryModel {
    pub threshold: f64,
    pub clusters: Vec<PrimaryCluster>,
}

pub fn train_primary(demos: &[Demonstration], config: &TrainConfig) -> Result<PrimaryModel> {
    if demos.len() < 2 {
        return Err(Error::TooFewUsers {
            needed: 2,
            got: demos.len(),
        });
    }
    let seqs: Vec<Vec<&str>> = demos.iter().map(|d| d.primaries().collect()).collect();
    let matrix = distance_matrix(&seqs, config.metric);
    let partition = cluster(&matrix, config.linkage)?;
    let n = demos.len() as f64;
    Ok(PrimaryModel {
        threshold: partition.threshold,
        clusters: partition
            .clusters
            .iter()
            .map(|c| PrimaryCluster {
                members: c.iter().map(|&i| demos[i].clone()).collect(),
                prior: c.len() as f64 / n,
            })
            .collect(),
    })
}

impl PrimaryModel {
    /// Posterior given the primaries observed so far: likelihood is the
    /// fraction of members whose own first primaries are identical.
    pub fn posterior(&self, observed: &[String]) -> Vec<f64> {
        let priors: Vec<f64> = self.clusters.iter().map(|c| c.prior).collect();
        if observed.is_empty() {
            return priors;
        }
        let joint: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| {
                let hits = c
                    .members
                    .iter()
                    .filter(|d| {
                        d.steps.len() >= observed.len()
                            && d.steps.iter().zip(observed).all(|(s, o)| &s.primary == o)
                    })
                    .count();
                hits as f64 / c.members.len() as f64 * c.prior
            })
            .collect();
        let total: f64 = joint.iter().sum();
        if total > 0.0 {
            joint.into_iter().map(|p| p / total).collect()
        } else {
            priors
        }
    }

    fn predict(&self, observed: &[String], rng: &mut ChaCha8Rng) -> SecondaryActionSet {
        let z = commit(&self.posterior(observed), rng);
        let t = observed.len();
        modal_set(
            self.clusters[z]
                .members
                .iter()
                .filter_map(|d| d.steps.get(t))
                .map(|s| &s.secondary),
            rng,
        )
        .unwrap_or_default()
    }
}

pub fn replay(model: &PrimaryModel, demo: &Demonstration, seed: u64) -> Vec<StepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = Vec::with_capacity(demo.steps.len());
    demo.steps
        .iter()
        .map(|step| {
            let predicted = model.predict(&observed, &mut rng);
            observed.push(step.primary.clone());
            StepOutcome {
                predicted,
                actual: step.secondary.clone(),
            }
        })
        .collect()
}
