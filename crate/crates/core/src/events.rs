//! Segmentation of demonstrations into events.
//!
//! An event is a maximal run of steps whose secondary sets all fit inside the
//! set of secondary actions accumulated since the event started. NOOP fits
//! everywhere. An event's identity is the union of its secondary sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Demonstration, SecondaryActionSet, TimeStep};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub primaries: Vec<String>,
    pub secondaries: Vec<SecondaryActionSet>,
    pub identity: SecondaryActionSet,
    /// Index of the first step (0-based).
    pub start_step: usize,
    /// Index of the last step, inclusive.
    pub end_step: usize,
}

impl Event {
    fn open(step: &TimeStep, index: usize) -> Self {
        Self {
            primaries: vec![step.primary.clone()],
            secondaries: vec![step.secondary.clone()],
            identity: step.secondary.clone(),
            start_step: index,
            end_step: index,
        }
    }

    fn accepts(&self, secondary: &SecondaryActionSet) -> bool {
        // an event that has only seen NOOPs so far has no identity yet
        self.identity.is_empty() || secondary.is_subset(&self.identity)
    }

    fn absorb(&mut self, step: &TimeStep, index: usize) {
        self.identity.extend_from(&step.secondary);
        self.primaries.push(step.primary.clone());
        self.secondaries.push(step.secondary.clone());
        self.end_step = index;
    }

    pub fn len(&self) -> usize {
        self.primaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primaries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSequence {
    pub user_id: String,
    pub events: Vec<Event>,
}

/// Serialized form of one event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub identity: SecondaryActionSet,
    pub primaries: Vec<String>,
}

impl EventSequence {
    pub fn identities(&self) -> Vec<SecondaryActionSet> {
        identities(self)
    }

    pub fn steps(&self) -> usize {
        self.events.iter().map(Event::len).sum()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.events
            .iter()
            .map(|e| EventRecord {
                identity: e.identity.clone(),
                primaries: e.primaries.clone(),
            })
            .collect()
    }
}

/// Incremental segmenter. Feeding steps one at a time yields, after each
/// push, exactly the segmentation of the prefix seen so far.
#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    closed: Vec<Event>,
    current: Option<Event>,
    steps: usize,
}

impl Segmenter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: &TimeStep) {
        let index = self.steps;
        self.steps += 1;
        match self.current.as_mut() {
            Some(ev) if ev.accepts(&step.secondary) => ev.absorb(step, index),
            _ => {
                if let Some(done) = self.current.replace(Event::open(step, index)) {
                    self.closed.push(done);
                }
            }
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Events so far, the last one possibly still in progress.
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.closed.iter().chain(self.current.iter())
    }

    pub fn current(&self) -> Option<&Event> {
        self.current.as_ref()
    }

    pub fn identities(&self) -> Vec<SecondaryActionSet> {
        self.events().map(|e| e.identity.clone()).collect()
    }

    pub fn finish(self, user_id: impl Into<String>) -> EventSequence {
        let mut events = self.closed;
        events.extend(self.current);
        EventSequence {
            user_id: user_id.into(),
            events,
        }
    }
}

pub fn segment(demo: &Demonstration) -> EventSequence {
    segment_steps(&demo.user_id, &demo.steps)
}

fn segment_steps(user_id: &str, steps: &[TimeStep]) -> EventSequence {
    let mut seg = Segmenter::new();
    for step in steps {
        seg.push(step);
    }
    seg.finish(user_id)
}

/// Segments the first `t` steps of `demo`.
pub fn segment_prefix(demo: &Demonstration, t: usize) -> Result<EventSequence> {
    let n = demo.steps.len();
    if t == 0 || t > n {
        return Err(Error::OutOfRange { t, n });
    }
    Ok(segment_steps(&demo.user_id, &demo.steps[..t]))
}

pub fn identities(seq: &EventSequence) -> Vec<SecondaryActionSet> {
    seq.events.iter().map(|e| e.identity.clone()).collect()
}

/// Identity sequence of every prefix: element `t` is the identity sequence
/// after `t` steps, so element 0 is empty.
pub fn prefix_identities(demo: &Demonstration) -> Vec<Vec<SecondaryActionSet>> {
    let mut seg = Segmenter::new();
    let mut out = Vec::with_capacity(demo.steps.len() + 1);
    out.push(Vec::new());
    for step in &demo.steps {
        seg.push(step);
        out.push(seg.identities());
    }
    out
}
