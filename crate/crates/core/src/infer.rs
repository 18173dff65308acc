//! Online inference for a new user.
//!
//! After every primary action the session re-segments the observed prefix,
//! scores each high-level cluster by the fraction of its members whose own
//! prefix of the same length has the same event-identity sequence, commits to
//! the most probable cluster, follows that cluster's representative event
//! sequence to find the ongoing event, and predicts the next secondary set
//! from the most probable low-level cluster of that event.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{prefix_identities, segment, Segmenter};
use crate::model::{canonicalize, Action, Demonstration, SecondaryActionSet, TimeStep};
use crate::train::{EventClusters, PreferenceModel};

/// How the secondary set inside an event is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    /// High-level cluster, then a low-level cluster of the ongoing event.
    #[default]
    TwoStage,
    /// High-level cluster only; secondary sets come from the members of that
    /// cluster at the same event position.
    EventOnly,
}

/// Per-member event structure of the training corpus, precomputed once.
#[derive(Debug)]
struct MemberTrace {
    /// Interned identity sequence after each prefix length (index = t).
    prefix_keys: Vec<u32>,
    /// (identity, secondary sets) of each event of the full demonstration.
    events: Vec<(SecondaryActionSet, Vec<SecondaryActionSet>)>,
}

/// A trained model plus the lookup tables inference needs. Immutable and
/// shareable between sessions.
#[derive(Debug)]
pub struct Engine {
    model: PreferenceModel,
    keys: HashMap<Vec<SecondaryActionSet>, u32>,
    /// Aligned with `model.high_clusters[c].members`.
    traces: Vec<Vec<MemberTrace>>,
}

impl Engine {
    pub fn new(model: PreferenceModel) -> Result<Self> {
        let mut keys: HashMap<Vec<SecondaryActionSet>, u32> = HashMap::new();
        let mut traces = Vec::with_capacity(model.high_clusters.len());
        for c in &model.high_clusters {
            let mut members = Vec::with_capacity(c.members.len());
            for user in &c.members {
                let demo = model.demonstration(user).ok_or_else(|| {
                    Error::InvalidDemonstration(format!("model lacks demonstration of `{user}`"))
                })?;
                let prefix_keys = prefix_identities(demo)
                    .into_iter()
                    .map(|ids| {
                        let next = keys.len() as u32;
                        *keys.entry(ids).or_insert(next)
                    })
                    .collect();
                let events = segment(demo)
                    .events
                    .into_iter()
                    .map(|e| (e.identity, e.secondaries))
                    .collect();
                members.push(MemberTrace {
                    prefix_keys,
                    events,
                });
            }
            traces.push(members);
        }
        Ok(Self {
            model,
            keys,
            traces,
        })
    }

    pub fn model(&self) -> &PreferenceModel {
        &self.model
    }

    pub fn priors(&self) -> Vec<f64> {
        self.model.high_clusters.iter().map(|c| c.prior).collect()
    }

    /// Posterior over high-level clusters given the observed identity
    /// sequence after `t` steps. Falls back to the prior when no cluster has
    /// a consistent member.
    pub fn posterior_high(&self, observed: &[SecondaryActionSet], t: usize) -> Vec<f64> {
        let priors = self.priors();
        if t == 0 {
            return priors;
        }
        let Some(&key) = self.keys.get(observed) else {
            return priors;
        };
        let joint: Vec<f64> = self
            .traces
            .iter()
            .zip(&priors)
            .map(|(members, prior)| {
                let hits = members
                    .iter()
                    .filter(|m| m.prefix_keys[t.min(m.prefix_keys.len() - 1)] == key)
                    .count();
                hits as f64 / members.len() as f64 * prior
            })
            .collect();
        normalize_or(joint, priors)
    }

    /// Posterior over the low-level clusters of one event identity given the
    /// secondary sets seen so far inside the event.
    pub fn posterior_low(
        &self,
        identity: &SecondaryActionSet,
        observed: &[SecondaryActionSet],
    ) -> Result<Vec<f64>> {
        let ec = self.event_clusters(identity)?;
        Ok(low_posterior(ec, observed))
    }

    fn event_clusters(&self, identity: &SecondaryActionSet) -> Result<&EventClusters> {
        self.model
            .event_clusters(identity)
            .ok_or_else(|| Error::UnknownEvent(identity.to_string()))
    }
}

fn low_posterior(ec: &EventClusters, observed: &[SecondaryActionSet]) -> Vec<f64> {
    let priors: Vec<f64> = ec.clusters.iter().map(|c| c.prior).collect();
    if observed.is_empty() {
        return priors;
    }
    let joint = ec
        .clusters
        .iter()
        .map(|c| {
            let hits = c
                .members
                .iter()
                .filter(|m| m.sequence.starts_with(observed))
                .count();
            hits as f64 / c.members.len() as f64 * c.prior
        })
        .collect();
    normalize_or(joint, priors)
}

fn normalize_or(joint: Vec<f64>, fallback: Vec<f64>) -> Vec<f64> {
    let total: f64 = joint.iter().sum();
    if total > 0.0 {
        joint.into_iter().map(|p| p / total).collect()
    } else {
        fallback
    }
}

/// Index of the maximum; exact ties are broken uniformly at random.
pub fn commit<R: Rng + ?Sized>(posterior: &[f64], rng: &mut R) -> usize {
    let max = posterior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..posterior.len()).filter(|&i| posterior[i] == max).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[rng.gen_range(0..n)],
    }
}

/// Most frequent set; exact ties are broken uniformly at random.
pub fn modal_set<'a, R: Rng + ?Sized>(
    items: impl IntoIterator<Item = &'a SecondaryActionSet>,
    rng: &mut R,
) -> Option<SecondaryActionSet> {
    let mut counts: BTreeMap<&SecondaryActionSet, usize> = BTreeMap::new();
    for s in items {
        *counts.entry(s).or_insert(0) += 1;
    }
    let max = counts.values().copied().max()?;
    let ties: Vec<&SecondaryActionSet> = counts
        .into_iter()
        .filter(|&(_, c)| c == max)
        .map(|(s, _)| s)
        .collect();
    let pick = if ties.len() == 1 { 0 } else { rng.gen_range(0..ties.len()) };
    Some(ties[pick].clone())
}

/// Continuation rule: the event goes on if a strict majority of the candidate
/// sequences are longer than what has been observed; the prediction is then
/// their modal element at that position.
fn continue_event<R: Rng + ?Sized>(
    candidates: &[&[SecondaryActionSet]],
    m: usize,
    rng: &mut R,
) -> Option<SecondaryActionSet> {
    let longer: Vec<&[SecondaryActionSet]> =
        candidates.iter().copied().filter(|s| s.len() > m).collect();
    if 2 * longer.len() > candidates.len() {
        modal_set(longer.iter().map(|s| &s[m]), rng)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub set: SecondaryActionSet,
    /// The representative event sequence had no event left to predict from.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// 1-based index of the step the prediction was made for.
    pub step: usize,
    pub predicted: SecondaryActionSet,
    pub accepted: Option<bool>,
    pub actual: Option<SecondaryActionSet>,
    pub posterior_high: Vec<f64>,
    pub committed_high: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
struct Pending {
    predicted: SecondaryActionSet,
    resolved: Option<SecondaryActionSet>,
}

/// Inference state for one new user. Not internally synchronized.
#[derive(Debug, Clone)]
pub struct Session {
    engine: Arc<Engine>,
    resolution: Resolution,
    seed: u64,
    rng: ChaCha8Rng,
    steps: Vec<TimeStep>,
    segmenter: Segmenter,
    posterior_high: Vec<f64>,
    committed_high: Option<usize>,
    low_posterior: Option<(SecondaryActionSet, Vec<f64>)>,
    pending: Option<Pending>,
    exhausted: bool,
    transcript: Vec<TranscriptRecord>,
}

impl Session {
    pub fn new(engine: Arc<Engine>, resolution: Resolution, seed: u64) -> Self {
        let posterior_high = engine.priors();
        Self {
            engine,
            resolution,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: Vec::new(),
            segmenter: Segmenter::new(),
            posterior_high,
            committed_high: None,
            low_posterior: None,
            pending: None,
            exhausted: false,
            transcript: Vec::new(),
        }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> &[TimeStep] {
        &self.steps
    }

    pub fn posterior_high(&self) -> &[f64] {
        &self.posterior_high
    }

    pub fn committed_high(&self) -> Option<usize> {
        self.committed_high
    }

    /// Identity and posterior of the last low-level inference, if any.
    pub fn low_posterior(&self) -> Option<(&SecondaryActionSet, &[f64])> {
        self.low_posterior.as_ref().map(|(i, p)| (i, p.as_slice()))
    }

    pub fn pending_prediction(&self) -> Option<&SecondaryActionSet> {
        self.pending
            .as_ref()
            .filter(|p| p.resolved.is_none())
            .map(|p| &p.predicted)
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn transcript(&self) -> &[TranscriptRecord] {
        &self.transcript
    }

    pub fn observed_identities(&self) -> Vec<SecondaryActionSet> {
        self.segmenter.identities()
    }

    /// Predicts the secondary set to perform before the next primary action
    /// and records it as pending.
    pub fn predict(&mut self) -> Prediction {
        let t = self.steps.len();
        let engine = Arc::clone(&self.engine);
        let model = engine.model();
        let zh = commit(&self.posterior_high, &mut self.rng);
        self.committed_high = Some(zh);
        let plan = &model.high_clusters[zh].representative;

        let mut next_index = 0;
        let mut predicted = None;
        if let Some(current) = self.segmenter.current() {
            next_index = self.segmenter.events().count();
            let m = current.len();
            predicted = match self.resolution {
                Resolution::TwoStage => match engine.event_clusters(&current.identity) {
                    Ok(ec) => {
                        let post = low_posterior(ec, &current.secondaries);
                        let zl = commit(&post, &mut self.rng);
                        self.low_posterior = Some((current.identity.clone(), post));
                        let seqs: Vec<&[SecondaryActionSet]> = ec.clusters[zl]
                            .members
                            .iter()
                            .map(|mm| mm.sequence.as_slice())
                            .collect();
                        continue_event(&seqs, m, &mut self.rng)
                    }
                    Err(_) => None,
                },
                Resolution::EventOnly => {
                    let pos = next_index - 1;
                    let seqs: Vec<&[SecondaryActionSet]> = engine.traces[zh]
                        .iter()
                        .filter_map(|tr| tr.events.get(pos))
                        .filter(|(id, _)| *id == current.identity)
                        .map(|(_, s)| s.as_slice())
                        .collect();
                    continue_event(&seqs, m, &mut self.rng)
                }
            };
        }

        let mut exhausted = false;
        let set = match predicted {
            Some(set) => set,
            None => match plan.get(next_index) {
                None => {
                    exhausted = true;
                    SecondaryActionSet::noop()
                }
                Some(identity) => self
                    .first_of_event(zh, next_index, identity)
                    .unwrap_or_default(),
            },
        };
        self.exhausted |= exhausted;
        self.pending = Some(Pending {
            predicted: set.clone(),
            resolved: None,
        });
        self.transcript.push(TranscriptRecord {
            step: t + 1,
            predicted: set.clone(),
            accepted: None,
            actual: None,
            posterior_high: self.posterior_high.clone(),
            committed_high: zh,
            exhausted,
        });
        Prediction { set, exhausted }
    }

    /// Modal first secondary set of an event the user is assumed to start.
    fn first_of_event(
        &mut self,
        zh: usize,
        position: usize,
        identity: &SecondaryActionSet,
    ) -> Option<SecondaryActionSet> {
        let engine = Arc::clone(&self.engine);
        match self.resolution {
            Resolution::TwoStage => {
                let ec = engine.event_clusters(identity).ok()?;
                let post: Vec<f64> = ec.clusters.iter().map(|c| c.prior).collect();
                let zl = commit(&post, &mut self.rng);
                self.low_posterior = Some((identity.clone(), post));
                modal_set(
                    ec.clusters[zl].members.iter().filter_map(|m| m.sequence.first()),
                    &mut self.rng,
                )
            }
            Resolution::EventOnly => {
                let members = &engine.traces[zh];
                let at_position: Vec<&SecondaryActionSet> = members
                    .iter()
                    .filter_map(|tr| tr.events.get(position))
                    .filter(|(id, _)| id == identity)
                    .filter_map(|(_, s)| s.first())
                    .collect();
                if !at_position.is_empty() {
                    return modal_set(at_position, &mut self.rng);
                }
                modal_set(
                    members
                        .iter()
                        .flat_map(|tr| tr.events.iter())
                        .filter(|(id, _)| id == identity)
                        .filter_map(|(_, s)| s.first()),
                    &mut self.rng,
                )
            }
        }
    }

    /// Resolves the pending prediction: accepted, or rejected with the set
    /// the user actually needed.
    pub fn observe_feedback(
        &mut self,
        accepted: bool,
        actual: Option<SecondaryActionSet>,
    ) -> Result<()> {
        let pending = self
            .pending
            .as_mut()
            .filter(|p| p.resolved.is_none())
            .ok_or(Error::NoPendingPrediction)?;
        let resolved = if accepted {
            pending.predicted.clone()
        } else {
            actual.ok_or(Error::MissingActual)?
        };
        if let Some(rec) = self.transcript.last_mut() {
            rec.accepted = Some(accepted);
            rec.actual = Some(resolved.clone());
        }
        pending.resolved = Some(resolved);
        Ok(())
    }

    /// Appends a primary action, preceded by the resolved secondary set (or
    /// NOOP when nothing was predicted), and refreshes the high-level
    /// posterior.
    pub fn observe_primary(&mut self, action: &Action) -> Result<()> {
        let Action::Primary(id) = action else {
            return Err(Error::WrongKind {
                id: action.to_string(),
                expected: crate::model::ActionKind::Primary,
                found: action.kind(),
            });
        };
        match canonicalize(id, &self.engine.model().task)? {
            Action::Primary(_) => {}
            other => {
                return Err(Error::WrongKind {
                    id: id.clone(),
                    expected: crate::model::ActionKind::Primary,
                    found: other.kind(),
                })
            }
        }
        let secondary = match self.pending.take() {
            None => SecondaryActionSet::noop(),
            Some(Pending {
                resolved: Some(s), ..
            }) => s,
            Some(p) => {
                self.pending = Some(p);
                return Err(Error::PendingFeedback);
            }
        };
        let step = TimeStep::new(secondary, id.clone());
        self.segmenter.push(&step);
        self.steps.push(step);
        let observed = self.segmenter.identities();
        self.posterior_high = self.engine.posterior_high(&observed, self.steps.len());
        Ok(())
    }
}

/// Outcome of one replayed step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub predicted: SecondaryActionSet,
    pub actual: SecondaryActionSet,
}

impl StepOutcome {
    pub fn correct(&self) -> bool {
        self.predicted == self.actual
    }
}

/// Replays a full demonstration: predict, give feedback against the user's
/// actual set, observe the primary.
pub fn replay(
    engine: &Arc<Engine>,
    demo: &Demonstration,
    resolution: Resolution,
    seed: u64,
) -> Result<Vec<StepOutcome>> {
    let mut session = Session::new(Arc::clone(engine), resolution, seed);
    let mut out = Vec::with_capacity(demo.steps.len());
    for step in &demo.steps {
        let predicted = session.predict().set;
        let accepted = predicted == step.secondary;
        session.observe_feedback(accepted, Some(step.secondary.clone()))?;
        session.observe_primary(&Action::Primary(step.primary.clone()))?;
        out.push(StepOutcome {
            predicted,
            actual: step.secondary.clone(),
        });
    }
    Ok(out)
}
