//! Actions, time steps and demonstrations.
//!
//! A raw action log alternates between secondary actions (delegable support,
//! e.g. fetching a part) and primary actions (connections the human makes).
//! Before anything else the log is folded into the turn-taking form: every
//! primary action is preceded by exactly one set of secondary actions, with
//! the empty set standing for NOOP.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix of the canonical token emitted for a fungible part type.
pub const FUNGIBLE_PREFIX: &str = "bring:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    pub part_id: String,
    pub part_type: String,
    #[serde(default)]
    pub fungible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimaryActionDef {
    pub action_id: String,
    pub required_part_types: Vec<String>,
    /// Concrete parts joined by this action. Optional; when present the
    /// part types must match `required_part_types` as a multiset.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondaryActionDef {
    pub action_id: String,
    pub supplied_part_type: String,
    /// Concrete part brought by this action, if it maps to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub task_id: String,
    pub parts: Vec<Part>,
    pub primary_actions: Vec<PrimaryActionDef>,
    pub secondary_actions: Vec<SecondaryActionDef>,
    /// Each primary action may be performed at most once per demonstration.
    #[serde(default = "default_true")]
    pub unique_primaries: bool,
}

impl TaskDefinition {
    /// Checks the structural invariants of a task.
    pub fn check(&self) -> Result<()> {
        if self.primary_actions.is_empty() {
            return Err(Error::InvalidTask("no primary actions".into()));
        }
        let mut ids = HashSet::new();
        for id in self
            .primary_actions
            .iter()
            .map(|a| &a.action_id)
            .chain(self.secondary_actions.iter().map(|a| &a.action_id))
        {
            if id.starts_with(FUNGIBLE_PREFIX) {
                return Err(Error::InvalidTask(format!(
                    "action id `{id}` uses the reserved prefix `{FUNGIBLE_PREFIX}`"
                )));
            }
            if !ids.insert(id.as_str()) {
                return Err(Error::InvalidTask(format!("duplicate action id `{id}`")));
            }
        }
        let mut part_ids = HashSet::new();
        for p in &self.parts {
            if !part_ids.insert(p.part_id.as_str()) {
                return Err(Error::InvalidTask(format!("duplicate part id `{}`", p.part_id)));
            }
        }
        for ty in self.part_types() {
            let fungible: BTreeSet<bool> = self
                .parts
                .iter()
                .filter(|p| p.part_type == ty)
                .map(|p| p.fungible)
                .collect();
            if fungible.len() > 1 {
                return Err(Error::InvalidTask(format!(
                    "part type `{ty}` mixes fungible and non-fungible parts"
                )));
            }
        }
        let types = self.part_types();
        for a in &self.primary_actions {
            for ty in &a.required_part_types {
                if !types.contains(ty.as_str()) {
                    return Err(Error::InvalidTask(format!(
                        "primary `{}` requires unknown part type `{ty}`",
                        a.action_id
                    )));
                }
            }
            if !a.parts.is_empty() {
                let mut declared: Vec<&str> =
                    a.required_part_types.iter().map(String::as_str).collect();
                let mut actual = Vec::with_capacity(a.parts.len());
                for pid in &a.parts {
                    let part = self.part(pid).ok_or_else(|| {
                        Error::InvalidTask(format!(
                            "primary `{}` joins unknown part `{pid}`",
                            a.action_id
                        ))
                    })?;
                    actual.push(part.part_type.as_str());
                }
                declared.sort_unstable();
                actual.sort_unstable();
                if declared != actual {
                    return Err(Error::InvalidTask(format!(
                        "primary `{}` parts do not match its required part types",
                        a.action_id
                    )));
                }
            }
        }
        for a in &self.secondary_actions {
            if !types.contains(a.supplied_part_type.as_str()) {
                return Err(Error::InvalidTask(format!(
                    "secondary `{}` supplies unknown part type `{}`",
                    a.action_id, a.supplied_part_type
                )));
            }
            if let Some(pid) = &a.part {
                match self.part(pid) {
                    Some(p) if p.part_type == a.supplied_part_type => {}
                    _ => {
                        return Err(Error::InvalidTask(format!(
                            "secondary `{}` names part `{pid}` of the wrong type or unknown",
                            a.action_id
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn part_types(&self) -> BTreeSet<&str> {
        self.parts.iter().map(|p| p.part_type.as_str()).collect()
    }

    pub fn part(&self, part_id: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.part_id == part_id)
    }

    pub fn primary(&self, action_id: &str) -> Option<&PrimaryActionDef> {
        self.primary_actions.iter().find(|a| a.action_id == action_id)
    }

    pub fn secondary(&self, action_id: &str) -> Option<&SecondaryActionDef> {
        self.secondary_actions.iter().find(|a| a.action_id == action_id)
    }

    pub fn is_fungible(&self, part_type: &str) -> bool {
        self.parts
            .iter()
            .any(|p| p.part_type == part_type && p.fungible)
    }

    /// Secondary action that brings a given part.
    pub fn supplier_of(&self, part_id: &str) -> Option<&SecondaryActionDef> {
        self.secondary_actions
            .iter()
            .find(|a| a.part.as_deref() == Some(part_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Primary,
    Secondary,
    Noop,
}

/// A single canonical action token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Primary(String),
    Secondary(String),
    Noop,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Primary(_) => ActionKind::Primary,
            Action::Secondary(_) => ActionKind::Secondary,
            Action::Noop => ActionKind::Noop,
        }
    }

    pub fn id(&self) -> Option<&str> {
        match self {
            Action::Primary(id) | Action::Secondary(id) => Some(id),
            Action::Noop => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Primary(id) | Action::Secondary(id) => f.write_str(id),
            Action::Noop => f.write_str("NOOP"),
        }
    }
}

/// Maps a raw action id onto its canonical token.
///
/// Secondary actions whose part type is fungible collapse to
/// `bring:<part_type>`; every other id is kept verbatim. Canonical tokens are
/// accepted as input, so the mapping is idempotent.
pub fn canonicalize(raw_action: &str, task: &TaskDefinition) -> Result<Action> {
    if let Some(def) = task.primary(raw_action) {
        return Ok(Action::Primary(def.action_id.clone()));
    }
    if let Some(def) = task.secondary(raw_action) {
        return Ok(if task.is_fungible(&def.supplied_part_type) {
            Action::Secondary(format!("{FUNGIBLE_PREFIX}{}", def.supplied_part_type))
        } else {
            Action::Secondary(def.action_id.clone())
        });
    }
    if let Some(ty) = raw_action.strip_prefix(FUNGIBLE_PREFIX) {
        if task.is_fungible(ty) {
            return Ok(Action::Secondary(raw_action.to_string()));
        }
    }
    Err(Error::UnknownAction(raw_action.to_string()))
}

/// The secondary actions performed before one primary action. Empty means
/// NOOP.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecondaryActionSet(BTreeSet<String>);

impl SecondaryActionSet {
    pub fn noop() -> Self {
        Self::default()
    }

    pub fn is_noop(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>) -> bool {
        self.0.insert(token.into())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn is_subset(&self, other: &SecondaryActionSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn extend_from(&mut self, other: &SecondaryActionSet) {
        self.0.extend(other.0.iter().cloned());
    }

    /// Members in canonical (lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for SecondaryActionSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for SecondaryActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("NOOP");
        }
        f.write_str("{")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(t)?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeStep {
    pub secondary: SecondaryActionSet,
    pub primary: String,
}

impl TimeStep {
    pub fn new(secondary: SecondaryActionSet, primary: impl Into<String>) -> Self {
        Self {
            secondary,
            primary: primary.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demonstration {
    pub user_id: String,
    pub steps: Vec<TimeStep>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn primaries(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.primary.as_str())
    }

    /// Emits each step's secondary members followed by its primary.
    pub fn flatten(&self) -> Vec<Action> {
        let mut out = Vec::new();
        for step in &self.steps {
            out.extend(step.secondary.iter().map(|t| Action::Secondary(t.to_string())));
            out.push(Action::Primary(step.primary.clone()));
        }
        out
    }
}

/// Folds an ordered action log into time steps.
///
/// Consecutive secondary actions are merged into the set preceding the next
/// primary action; a primary with no secondary before it gets NOOP. Explicit
/// `Noop` entries in the log carry no information and are skipped.
pub fn to_timesteps(user_id: impl Into<String>, raw: &[Action]) -> Result<Demonstration> {
    if raw.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut steps = Vec::new();
    let mut pending = SecondaryActionSet::noop();
    let mut pending_count = 0usize;
    for action in raw {
        match action {
            Action::Secondary(id) => {
                pending.insert(id.clone());
                pending_count += 1;
            }
            Action::Primary(id) => {
                steps.push(TimeStep::new(std::mem::take(&mut pending), id.clone()));
                pending_count = 0;
            }
            Action::Noop => {}
        }
    }
    if pending_count > 0 {
        return Err(Error::TrailingSecondary(pending_count));
    }
    if steps.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(Demonstration {
        user_id: user_id.into(),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    UnknownAction { step: usize, id: String },
    WrongKind { step: usize, id: String },
    DuplicatePrimary { step: usize, id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub steps: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks that every token in `demo` is a canonical token of `task`.
pub fn validate(demo: &Demonstration, task: &TaskDefinition) -> ValidationReport {
    let mut findings = Vec::new();
    let mut seen = HashSet::new();
    for (step, ts) in demo.steps.iter().enumerate() {
        for token in ts.secondary.iter() {
            match canonicalize(token, task) {
                Ok(Action::Secondary(c)) if c == token => {}
                Ok(Action::Secondary(_)) | Err(_) => findings.push(Finding::UnknownAction {
                    step,
                    id: token.to_string(),
                }),
                Ok(_) => findings.push(Finding::WrongKind {
                    step,
                    id: token.to_string(),
                }),
            }
        }
        match canonicalize(&ts.primary, task) {
            Ok(Action::Primary(_)) => {
                if task.unique_primaries && !seen.insert(ts.primary.as_str()) {
                    findings.push(Finding::DuplicatePrimary {
                        step,
                        id: ts.primary.clone(),
                    });
                }
            }
            Ok(_) => findings.push(Finding::WrongKind {
                step,
                id: ts.primary.clone(),
            }),
            Err(_) => findings.push(Finding::UnknownAction {
                step,
                id: ts.primary.clone(),
            }),
        }
    }
    ValidationReport {
        steps: demo.steps.len(),
        findings,
    }
}
