//! Offline training: high-level clusters over event-identity sequences and,
//! per event identity, low-level clusters over the secondary-set sequences
//! users produced inside that event.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cluster::{cluster, Linkage, Partition};
use crate::distance::{distance_matrix, Metric};
use crate::error::{Error, Result};
use crate::events::segment;
use crate::model::{validate, Demonstration, SecondaryActionSet, TaskDefinition};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub linkage: Linkage,
    pub metric: Metric,
    pub seed: u64,
}

pub type IdentitySequence = Vec<SecondaryActionSet>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighLevelCluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
    /// Full event-identity sequence of each member, aligned with `members`.
    pub sequences: Vec<IdentitySequence>,
    /// Most frequent member sequence.
    pub representative: IdentitySequence,
    pub prior: f64,
}

impl HighLevelCluster {
    pub fn is_dominant(&self) -> bool {
        self.members.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowMember {
    pub user_id: String,
    /// Which occurrence of the identity within the user's event sequence.
    pub occurrence: usize,
    pub sequence: Vec<SecondaryActionSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowLevelCluster {
    pub cluster_id: usize,
    pub members: Vec<LowMember>,
    pub prior: f64,
}

impl LowLevelCluster {
    pub fn is_dominant(&self) -> bool {
        self.members.len() >= 2
    }
}

/// Low-level clusters of one event identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClusters {
    pub identity: SecondaryActionSet,
    pub threshold: f64,
    pub clusters: Vec<LowLevelCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighLevelFit {
    pub threshold: f64,
    pub clusters: Vec<HighLevelCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub schema_version: u32,
    pub task_id: String,
    pub task: TaskDefinition,
    pub config: TrainConfig,
    pub high_threshold: f64,
    pub high_clusters: Vec<HighLevelCluster>,
    /// Sorted by identity.
    pub low_clusters: Vec<EventClusters>,
    pub demonstrations: Vec<Demonstration>,
}

impl PreferenceModel {
    pub fn event_clusters(&self, identity: &SecondaryActionSet) -> Option<&EventClusters> {
        self.low_clusters
            .binary_search_by(|e| e.identity.cmp(identity))
            .ok()
            .map(|i| &self.low_clusters[i])
    }

    pub fn demonstration(&self, user_id: &str) -> Option<&Demonstration> {
        self.demonstrations.iter().find(|d| d.user_id == user_id)
    }

    pub fn dominant_high_clusters(&self) -> usize {
        self.high_clusters.iter().filter(|c| c.is_dominant()).count()
    }
}

fn check_corpus(demos: &[Demonstration]) -> Result<()> {
    if demos.len() < 2 {
        return Err(Error::TooFewUsers {
            needed: 2,
            got: demos.len(),
        });
    }
    let mut seen = HashSet::new();
    for d in demos {
        if !seen.insert(d.user_id.as_str()) {
            return Err(Error::InvalidDemonstration(format!(
                "duplicate user id `{}`",
                d.user_id
            )));
        }
    }
    Ok(())
}

/// Most frequent sequence; ties go to the lexicographically smallest
/// serialized form.
pub fn modal_sequence(seqs: &[IdentitySequence]) -> IdentitySequence {
    let mut counts: BTreeMap<String, (usize, &IdentitySequence)> = BTreeMap::new();
    for s in seqs {
        let key = serde_json::to_string(s).expect("sets serialize");
        counts.entry(key).or_insert((0, s)).0 += 1;
    }
    let mut best: Option<(usize, &IdentitySequence)> = None;
    // BTreeMap iterates keys in ascending order, so strict `>` keeps the
    // smallest key among equals.
    for (count, seq) in counts.values() {
        if best.is_none_or(|(c, _)| *count > c) {
            best = Some((*count, seq));
        }
    }
    best.map(|(_, s)| s.clone()).unwrap_or_default()
}

fn priors(partition: &Partition) -> Vec<f64> {
    let n = partition.n() as f64;
    partition
        .clusters
        .iter()
        .map(|c| c.len() as f64 / n)
        .collect()
}

pub fn train_high(demos: &[Demonstration], config: &TrainConfig) -> Result<HighLevelFit> {
    check_corpus(demos)?;
    let sequences: Vec<IdentitySequence> = demos.iter().map(|d| segment(d).identities()).collect();
    let matrix = distance_matrix(&sequences, config.metric);
    let partition = cluster(&matrix, config.linkage)?;
    let priors = priors(&partition);
    let clusters = partition
        .clusters
        .iter()
        .zip(priors)
        .enumerate()
        .map(|(cluster_id, (members, prior))| {
            let seqs: Vec<IdentitySequence> =
                members.iter().map(|&i| sequences[i].clone()).collect();
            HighLevelCluster {
                cluster_id,
                members: members.iter().map(|&i| demos[i].user_id.clone()).collect(),
                representative: modal_sequence(&seqs),
                sequences: seqs,
                prior,
            }
        })
        .collect();
    Ok(HighLevelFit {
        threshold: partition.threshold,
        clusters,
    })
}

/// Every occurrence of every event identity, keyed by identity.
pub fn event_occurrences(demos: &[Demonstration]) -> BTreeMap<SecondaryActionSet, Vec<LowMember>> {
    let mut by_identity: BTreeMap<SecondaryActionSet, Vec<LowMember>> = BTreeMap::new();
    for d in demos {
        let mut occurrence: HashMap<SecondaryActionSet, usize> = HashMap::new();
        for ev in segment(d).events {
            let idx = occurrence.entry(ev.identity.clone()).or_insert(0);
            by_identity
                .entry(ev.identity)
                .or_default()
                .push(LowMember {
                    user_id: d.user_id.clone(),
                    occurrence: *idx,
                    sequence: ev.secondaries,
                });
            *idx += 1;
        }
    }
    by_identity
}

/// Low-level clusters for every event identity. Occurrences are pooled
/// across all users regardless of their high-level cluster.
pub fn train_low(demos: &[Demonstration], config: &TrainConfig) -> Result<Vec<EventClusters>> {
    let mut out = Vec::new();
    for (identity, members) in event_occurrences(demos) {
        let seqs: Vec<&[SecondaryActionSet]> =
            members.iter().map(|m| m.sequence.as_slice()).collect();
        let seqs: Vec<Vec<&SecondaryActionSet>> =
            seqs.iter().map(|s| s.iter().collect()).collect();
        let matrix = distance_matrix(&seqs, config.metric);
        let partition = cluster(&matrix, config.linkage)?;
        let priors = priors(&partition);
        let clusters = partition
            .clusters
            .iter()
            .zip(priors)
            .enumerate()
            .map(|(cluster_id, (idx, prior))| LowLevelCluster {
                cluster_id,
                members: idx.iter().map(|&i| members[i].clone()).collect(),
                prior,
            })
            .collect();
        out.push(EventClusters {
            identity,
            threshold: partition.threshold,
            clusters,
        });
    }
    Ok(out)
}

pub fn train(
    demos: &[Demonstration],
    task: &TaskDefinition,
    config: &TrainConfig,
) -> Result<PreferenceModel> {
    check_corpus(demos)?;
    for d in demos {
        let report = validate(d, task);
        if !report.is_valid() {
            return Err(Error::InvalidDemonstration(format!(
                "user `{}`: {:?}",
                d.user_id, report.findings
            )));
        }
    }
    let high = train_high(demos, config)?;
    let low = train_low(demos, config)?;
    Ok(PreferenceModel {
        schema_version: SCHEMA_VERSION,
        task_id: task.task_id.clone(),
        task: task.clone(),
        config: *config,
        high_threshold: high.threshold,
        high_clusters: high.clusters,
        low_clusters: low,
        demonstrations: demos.to_vec(),
    })
}
