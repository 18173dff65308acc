//! Synthetic demonstration corpora.
//!
//! A preset splits the task's primary actions into blocks (the intended
//! events), gives each group of users a block order and a per-block style
//! (the order of primaries inside the block), and adds outliers derived from
//! a group by block-level perturbations. Secondary actions are derived by
//! fetching each part just before the first primary that needs it.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::segment;
use crate::model::{
    canonicalize, to_timesteps, Action, Demonstration, Part, PrimaryActionDef,
    SecondaryActionDef, TaskDefinition,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub primaries: Vec<String>,
}

/// Order of primaries inside a block. Part types listed in `permute` are
/// relabeled by a random permutation per user; `shuffle` draws a fresh
/// order of the block's primaries per user instead of `order`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Style {
    pub name: String,
    pub block: String,
    pub order: Vec<String>,
    #[serde(default)]
    pub permute: Vec<String>,
    #[serde(default)]
    pub shuffle: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub count: usize,
    pub order: Vec<String>,
    /// Block name to style names; member `i` uses entry `i % len`.
    #[serde(default)]
    pub styles: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Perturbation {
    /// Swap the chunks at `at` and `at + 1`.
    Swap { at: usize },
    /// Keep the first `keep` primaries of chunk `at` in place and move the
    /// rest behind the following chunk.
    Split { at: usize, keep: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub group: String,
    /// Member slot of the base group whose styles the outlier uses.
    #[serde(default)]
    pub member: usize,
    pub ops: Vec<Perturbation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthPreset {
    pub name: String,
    pub blocks: Vec<Block>,
    pub styles: Vec<Style>,
    pub groups: Vec<GroupSpec>,
    pub outliers: Vec<OutlierSpec>,
}

/// Which users a generated corpus holds, in index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedUser {
    pub user_id: String,
    /// Group name, or `None` for outliers.
    pub group: Option<String>,
    pub blocks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub demos: Vec<Demonstration>,
    pub users: Vec<GeneratedUser>,
}

impl SynthPreset {
    pub fn size(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum::<usize>() + self.outliers.len()
    }

    fn block(&self, name: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::InconsistentPreset(format!("unknown block `{name}`")))
    }

    fn style(&self, name: &str) -> Result<&Style> {
        self.styles
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::InconsistentPreset(format!("unknown style `{name}`")))
    }

    fn check(&self, task: &TaskDefinition) -> Result<()> {
        let mut seen = HashSet::new();
        for b in &self.blocks {
            for p in &b.primaries {
                if task.primary(p).is_none() {
                    return Err(Error::InconsistentPreset(format!(
                        "block `{}` references unknown primary `{p}`",
                        b.name
                    )));
                }
                if !seen.insert(p.as_str()) {
                    return Err(Error::InconsistentPreset(format!(
                        "primary `{p}` appears in more than one block"
                    )));
                }
            }
        }
        for s in &self.styles {
            let block = self.block(&s.block)?;
            let mut a = s.order.clone();
            let mut b = block.primaries.clone();
            a.sort();
            b.sort();
            if a != b {
                return Err(Error::InconsistentPreset(format!(
                    "style `{}` is not an ordering of block `{}`",
                    s.name, s.block
                )));
            }
        }
        for g in &self.groups {
            for name in &g.order {
                self.block(name)?;
            }
            for (block, styles) in &g.styles {
                for s in styles {
                    if self.style(s)?.block != *block {
                        return Err(Error::InconsistentPreset(format!(
                            "style `{s}` does not belong to block `{block}`"
                        )));
                    }
                }
            }
        }
        for o in &self.outliers {
            if !self.groups.iter().any(|g| g.name == o.group) {
                return Err(Error::InconsistentPreset(format!(
                    "outlier references unknown group `{}`",
                    o.group
                )));
            }
        }
        Ok(())
    }
}

/// Primary ids of one block for one user, after relabeling permuted parts.
fn realize_block(
    preset: &SynthPreset,
    task: &TaskDefinition,
    group: &GroupSpec,
    block: &str,
    member: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    let Some(style) = group.styles.get(block).filter(|s| !s.is_empty()) else {
        return Ok(preset.block(block)?.primaries.clone());
    };
    let style = preset.style(&style[member % style.len()])?;
    let mut relabel: BTreeMap<&str, &str> = BTreeMap::new();
    for ty in &style.permute {
        let ids: Vec<&str> = task
            .parts
            .iter()
            .filter(|p| &p.part_type == ty)
            .map(|p| p.part_id.as_str())
            .collect();
        let mut shuffled = ids.clone();
        shuffled.shuffle(rng);
        relabel.extend(ids.into_iter().zip(shuffled));
    }
    let mut order = style.order.clone();
    if style.shuffle {
        order.shuffle(rng);
    }
    order
        .iter()
        .map(|id| {
            if relabel.is_empty() {
                return Ok(id.clone());
            }
            let def = task.primary(id).expect("checked against task");
            let mut target: Vec<&str> = def
                .parts
                .iter()
                .map(|p| relabel.get(p.as_str()).copied().unwrap_or(p))
                .collect();
            target.sort_unstable();
            task.primary_actions
                .iter()
                .find(|cand| {
                    let mut parts: Vec<&str> = cand.parts.iter().map(String::as_str).collect();
                    parts.sort_unstable();
                    parts == target
                })
                .map(|cand| cand.action_id.clone())
                .ok_or_else(|| {
                    Error::InconsistentPreset(format!(
                        "relabeling `{id}` in style `{}` yields no primary action",
                        style.name
                    ))
                })
        })
        .collect()
}

/// Raw action log with each part fetched right before its first use.
fn with_supplies(task: &TaskDefinition, primaries: &[String]) -> Result<Vec<Action>> {
    let mut present: HashSet<&str> = HashSet::new();
    let mut raw = Vec::new();
    for id in primaries {
        let def = task
            .primary(id)
            .ok_or_else(|| Error::UnknownAction(id.clone()))?;
        for part in &def.parts {
            if present.insert(part.as_str()) {
                let supplier = task.supplier_of(part).ok_or_else(|| {
                    Error::InconsistentPreset(format!("no secondary action supplies `{part}`"))
                })?;
                raw.push(canonicalize(&supplier.action_id, task)?);
            }
        }
        raw.push(Action::Primary(id.clone()));
    }
    Ok(raw)
}

fn apply(op: Perturbation, chunks: &mut Vec<(String, Vec<String>)>) -> Result<()> {
    match op {
        Perturbation::Swap { at } => {
            if at + 1 >= chunks.len() {
                return Err(Error::InconsistentPreset(format!("swap at {at} out of range")));
            }
            chunks.swap(at, at + 1);
        }
        Perturbation::Split { at, keep } => {
            let Some((name, prims)) = chunks.get_mut(at) else {
                return Err(Error::InconsistentPreset(format!("split at {at} out of range")));
            };
            if keep == 0 || keep >= prims.len() {
                return Err(Error::InconsistentPreset(format!(
                    "split of `{name}` must keep between 1 and {} primaries",
                    prims.len() - 1
                )));
            }
            let tail = prims.split_off(keep);
            let name = format!("{name}'");
            let dest = (at + 2).min(chunks.len());
            chunks.insert(dest, (name, tail));
        }
    }
    Ok(())
}

pub fn generate(preset: &SynthPreset, task: &TaskDefinition, seed: u64) -> Result<Corpus> {
    preset.check(task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = preset.size().saturating_sub(1).to_string().len().max(2);
    let mut demos = Vec::with_capacity(preset.size());
    let mut users = Vec::with_capacity(preset.size());

    let mut build = |group: &GroupSpec,
                     member: usize,
                     ops: &[Perturbation],
                     rng: &mut ChaCha8Rng|
     -> Result<()> {
        let mut chunks = Vec::with_capacity(group.order.len());
        for block in &group.order {
            chunks.push((
                block.clone(),
                realize_block(preset, task, group, block, member, rng)?,
            ));
        }
        for &op in ops {
            apply(op, &mut chunks)?;
        }
        let primaries: Vec<String> = chunks.iter().flat_map(|(_, p)| p.clone()).collect();
        let user_id = format!("u{:0width$}", demos.len());
        let demo = to_timesteps(user_id.clone(), &with_supplies(task, &primaries)?)?;
        if ops.is_empty() {
            let seq = segment(&demo);
            let recovered: Vec<&Vec<String>> = seq.events.iter().map(|e| &e.primaries).collect();
            let intended: Vec<&Vec<String>> = chunks.iter().map(|(_, p)| p).collect();
            if recovered != intended {
                return Err(Error::InconsistentPreset(format!(
                    "group `{}` member {member}: segmentation finds {} events where {} blocks were intended",
                    group.name,
                    recovered.len(),
                    intended.len()
                )));
            }
        }
        users.push(GeneratedUser {
            user_id,
            group: ops.is_empty().then(|| group.name.clone()),
            blocks: chunks.into_iter().map(|(n, _)| n).collect(),
        });
        demos.push(demo);
        Ok(())
    };

    for group in &preset.groups {
        for member in 0..group.count {
            build(group, member, &[], &mut rng)?;
        }
    }
    for outlier in &preset.outliers {
        let group = preset
            .groups
            .iter()
            .find(|g| g.name == outlier.group)
            .expect("checked");
        build(group, outlier.member, &outlier.ops, &mut rng)?;
    }
    Ok(Corpus { demos, users })
}

/// Bookcase with two rectangular frames (front: L1,L2,S1,S2; back:
/// L3,L4,S3,S4), four connectors joining the frames and five shelves each
/// fixed to all four long boards. 17 parts, 32 connections, every part type
/// fungible.
pub fn bookcase_task() -> TaskDefinition {
    let mut parts = Vec::new();
    for (prefix, ty, count) in [
        ("L", "long_board", 4),
        ("S", "short_board", 4),
        ("C", "connector", 4),
        ("H", "shelf", 5),
    ] {
        for i in 1..=count {
            parts.push(Part {
                part_id: format!("{prefix}{i}"),
                part_type: ty.into(),
                fungible: true,
            });
        }
    }
    let type_of = |pid: &str| -> String {
        parts
            .iter()
            .find(|p| p.part_id == pid)
            .map(|p| p.part_type.clone())
            .expect("known part")
    };
    let mut primary_actions = Vec::new();
    let mut connect = |id: String, joined: &[&str]| {
        primary_actions.push(PrimaryActionDef {
            action_id: id,
            required_part_types: joined.iter().map(|p| type_of(p)).collect(),
            parts: joined.iter().map(|p| p.to_string()).collect(),
        });
    };
    for (l, s) in [
        ("L1", "S1"),
        ("L2", "S1"),
        ("L1", "S2"),
        ("L2", "S2"),
        ("L3", "S3"),
        ("L4", "S3"),
        ("L3", "S4"),
        ("L4", "S4"),
    ] {
        connect(format!("connect_{l}_{s}"), &[l, s]);
    }
    for (c, a, b) in [("C1", "S1", "S3"), ("C2", "S1", "S3"), ("C3", "S2", "S4"), ("C4", "S2", "S4")] {
        connect(format!("connect_{c}_{a}_{b}"), &[c, a, b]);
    }
    for h in 1..=5 {
        for l in 1..=4 {
            let (hp, lp) = (format!("H{h}"), format!("L{l}"));
            connect(format!("connect_{hp}_{lp}"), &[&hp, &lp]);
        }
    }
    let secondary_actions = parts
        .iter()
        .map(|p| SecondaryActionDef {
            action_id: format!("bring_{}", p.part_id),
            supplied_part_type: p.part_type.clone(),
            part: Some(p.part_id.clone()),
        })
        .collect();
    TaskDefinition {
        task_id: "ikea-bookcase".into(),
        parts,
        primary_actions,
        secondary_actions,
        unique_primaries: true,
    }
}

fn boards_block() -> Vec<String> {
    ["L1_S1", "L2_S1", "L1_S2", "L2_S2", "L3_S3", "L4_S3", "L3_S4", "L4_S4"]
        .iter()
        .map(|s| format!("connect_{s}"))
        .collect()
}

fn con_block() -> Vec<String> {
    ["C1_S1_S3", "C2_S1_S3", "C3_S2_S4", "C4_S2_S4"]
        .iter()
        .map(|s| format!("connect_{s}"))
        .collect()
}

/// Each shelf to the front pair of long boards, then every shelf to the back
/// pair: one NOOP after each shelf is supplied.
fn one_side_first() -> Vec<String> {
    let mut out = Vec::new();
    for pair in [[1, 2], [3, 4]] {
        for h in 1..=5 {
            for l in pair {
                out.push(format!("connect_H{h}_L{l}"));
            }
        }
    }
    out
}

/// Each shelf to all four long boards before the next: three NOOPs after each
/// shelf is supplied.
fn both_sides() -> Vec<String> {
    (1..=5)
        .flat_map(|h| (1..=4).map(move |l| format!("connect_H{h}_L{l}")))
        .collect()
}

fn styles(entries: &[(&str, &[&str])]) -> BTreeMap<String, Vec<String>> {
    entries
        .iter()
        .map(|(b, s)| (b.to_string(), s.iter().map(|x| x.to_string()).collect()))
        .collect()
}

/// 18 users over the bookcase: three groups of 6, 3 and 5 users with the
/// block orders boards→con→shelves, shelves→boards→con and
/// boards→shelves→con, plus four outliers. Shelf connections come in a
/// "one side first" and a "both sides" style, mixed within groups.
pub fn fig4_like() -> SynthPreset {
    let shelves = "shelves";
    SynthPreset {
        name: "fig4-like".into(),
        blocks: vec![
            Block { name: "boards".into(), primaries: boards_block() },
            Block { name: "con".into(), primaries: con_block() },
            Block { name: shelves.into(), primaries: both_sides() },
        ],
        styles: vec![
            Style {
                name: "connectors".into(),
                block: "con".into(),
                order: con_block(),
                permute: vec![],
                shuffle: true,
            },
            Style {
                name: "one-side".into(),
                block: shelves.into(),
                order: one_side_first(),
                permute: vec!["shelf".into()],
                shuffle: false,
            },
            Style {
                name: "both-sides".into(),
                block: shelves.into(),
                order: both_sides(),
                permute: vec!["shelf".into()],
                shuffle: false,
            },
        ],
        groups: vec![
            GroupSpec {
                name: "boards-con-shelves".into(),
                count: 6,
                order: vec!["boards".into(), "con".into(), shelves.into()],
                styles: styles(&[
                    ("con", &["connectors"]),
                    (shelves, &["one-side", "one-side", "both-sides"]),
                ]),
            },
            GroupSpec {
                name: "shelves-boards-con".into(),
                count: 3,
                order: vec![shelves.into(), "boards".into(), "con".into()],
                styles: styles(&[("con", &["connectors"]), (shelves, &["one-side"])]),
            },
            GroupSpec {
                name: "boards-shelves-con".into(),
                count: 5,
                order: vec!["boards".into(), shelves.into(), "con".into()],
                styles: styles(&[
                    ("con", &["connectors"]),
                    (shelves, &["both-sides", "one-side"]),
                ]),
            },
        ],
        outliers: vec![
            OutlierSpec {
                group: "boards-con-shelves".into(),
                member: 0,
                ops: vec![Perturbation::Swap { at: 0 }],
            },
            OutlierSpec {
                group: "shelves-boards-con".into(),
                member: 0,
                ops: vec![Perturbation::Swap { at: 1 }],
            },
            OutlierSpec {
                group: "boards-con-shelves".into(),
                member: 2,
                ops: vec![Perturbation::Split { at: 0, keep: 4 }],
            },
            OutlierSpec {
                group: "boards-shelves-con".into(),
                member: 0,
                ops: vec![Perturbation::Split { at: 1, keep: 8 }],
            },
        ],
    }
}

/// Looks up a built-in preset by name.
pub fn preset(name: &str) -> Option<SynthPreset> {
    match name {
        "fig4-like" => Some(fig4_like()),
        _ => None,
    }
}
