#![allow(dead_code)]

pub mod oracle;

use prefstack::model::{canonicalize, to_timesteps, Action, Demonstration, TimeStep};
use prefstack::{SecondaryActionSet, TaskDefinition};

pub fn set(tokens: &[&str]) -> SecondaryActionSet {
    tokens.iter().copied().collect()
}

/// Demonstration from already-canonical (secondary set, primary) pairs.
pub fn steps(user: &str, steps: &[(&[&str], &str)]) -> Demonstration {
    Demonstration {
        user_id: user.into(),
        steps: steps.iter().map(|(s, p)| TimeStep::new(set(s), *p)).collect(),
    }
}

/// Demonstration from a whitespace separated raw action log.
pub fn raw(task: &TaskDefinition, user: &str, log: &str) -> Demonstration {
    let actions: Vec<Action> = log
        .split_whitespace()
        .map(|id| canonicalize(id, task).unwrap())
        .collect();
    to_timesteps(user, &actions).unwrap()
}

/// Shelves connected to the front pair of long boards first, one side at a
/// time.
pub fn shelves_one_side(fresh_boards: bool) -> String {
    let mut log = String::new();
    if fresh_boards {
        log.push_str("bring_L1 bring_L2 bring_L3 bring_L4 ");
    }
    for h in 1..=5 {
        log.push_str(&format!("bring_H{h} connect_H{h}_L1 connect_H{h}_L2 "));
    }
    for h in 1..=5 {
        log.push_str(&format!("connect_H{h}_L3 connect_H{h}_L4 "));
    }
    log
}

/// Each shelf to all four long boards before the next shelf.
pub fn shelves_both_sides(fresh_boards: bool) -> String {
    let mut log = String::new();
    if fresh_boards {
        log.push_str("bring_L1 bring_L2 bring_L3 bring_L4 ");
    }
    for h in 1..=5 {
        log.push_str(&format!("bring_H{h} "));
        for l in 1..=4 {
            log.push_str(&format!("connect_H{h}_L{l} "));
        }
    }
    log
}

/// Long and short boards into two frames.
pub fn boards(fresh_long: bool) -> String {
    let mut log = String::new();
    if fresh_long {
        log.push_str("bring_L1 bring_L2 ");
    }
    log.push_str("bring_S1 connect_L1_S1 connect_L2_S1 bring_S2 connect_L1_S2 connect_L2_S2 ");
    if fresh_long {
        log.push_str("bring_L3 bring_L4 ");
    }
    log.push_str("bring_S3 connect_L3_S3 connect_L4_S3 bring_S4 connect_L3_S4 connect_L4_S4 ");
    log
}

/// Four fungible part types `a`..`d` (one part each, supplied by `bring_a`
/// etc. as tokens `bring:a`) and primaries `p0`..`p39` needing no parts.
pub fn toy_task() -> TaskDefinition {
    use prefstack::model::{Part, PrimaryActionDef, SecondaryActionDef};
    let types = ["a", "b", "c", "d"];
    TaskDefinition {
        task_id: "toy".into(),
        parts: types
            .iter()
            .map(|t| Part { part_id: t.to_uppercase(), part_type: t.to_string(), fungible: true })
            .collect(),
        primary_actions: (0..40)
            .map(|i| PrimaryActionDef {
                action_id: format!("p{i}"),
                required_part_types: vec![],
                parts: vec![],
            })
            .collect(),
        secondary_actions: types
            .iter()
            .map(|t| SecondaryActionDef {
                action_id: format!("bring_{t}"),
                supplied_part_type: t.to_string(),
                part: None,
            })
            .collect(),
        unique_primaries: true,
    }
}

/// Demonstration over the toy task: one secondary set per step (`""` is
/// NOOP, `"ab"` is `{bring:a, bring:b}`), primaries numbered from `p0`.
pub fn toy(user: &str, sets: &[&str]) -> Demonstration {
    Demonstration {
        user_id: user.into(),
        steps: sets
            .iter()
            .enumerate()
            .map(|(i, s)| {
                TimeStep::new(s.chars().map(|c| format!("bring:{c}")).collect(), format!("p{i}"))
            })
            .collect(),
    }
}

pub fn toy_set(s: &str) -> SecondaryActionSet {
    s.chars().map(|c| format!("bring:{c}")).collect()
}

/// Model with the given high-level membership; low-level clusters are
/// trained normally.
pub fn model_with_clusters(groups: &[Vec<Demonstration>]) -> prefstack::train::PreferenceModel {
    use prefstack::events::{identities, segment};
    use prefstack::train::{modal_sequence, train_low, HighLevelCluster, PreferenceModel, TrainConfig, SCHEMA_VERSION};
    let all: Vec<Demonstration> = groups.concat();
    let total = all.len() as f64;
    let high_clusters = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let sequences: Vec<_> = g.iter().map(|d| identities(&segment(d))).collect();
            HighLevelCluster {
                cluster_id: i,
                members: g.iter().map(|d| d.user_id.clone()).collect(),
                representative: modal_sequence(&sequences),
                sequences,
                prior: g.len() as f64 / total,
            }
        })
        .collect();
    let config = TrainConfig::default();
    PreferenceModel {
        schema_version: SCHEMA_VERSION,
        task_id: "toy".into(),
        task: toy_task(),
        config,
        high_threshold: 0.0,
        high_clusters,
        low_clusters: train_low(&all, &config).unwrap(),
        demonstrations: all,
    }
}
