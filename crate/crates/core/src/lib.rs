//! Learning dominant assembly preferences at two resolutions and predicting
//! the next assistive action for a new user.
//!
//! The offline side turns demonstrations into event sequences
//! ([`events`]), clusters users on those sequences and, per event, on the
//! order in which parts were supplied ([`train`]). The online side
//! ([`infer`]) tracks a new user's actions and predicts the next set of
//! secondary actions. [`eval`] runs leave-one-out comparisons against
//! single-resolution baselines.

pub mod cluster;
pub mod distance;
pub mod error;
pub mod eval;
pub mod events;
pub mod infer;
pub mod io;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use model::{Action, ActionKind, Demonstration, SecondaryActionSet, TaskDefinition, TimeStep};
