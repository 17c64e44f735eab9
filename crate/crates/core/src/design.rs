//! Design as a sequential decision process.
//!
//! A design is a state, a design change is an action, and realizing a design
//! produces outcomes that a parametric utility function scores. The user model
//! and the assistant are written against [`DesignDomain`] only; the trip
//! planner in [`crate::trip`] is the one concrete domain.

use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which transition model `apply` uses.
///
/// `Objective` is how the change is actually realized; `Subjective` is how the
/// designer believes it is realized, and is what the designer plans with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Objective,
    Subjective,
}

/// Outcome vectors support differencing so what-if reports can show deltas.
pub trait OutcomeVector: Clone + Debug {
    /// `self - before`, field by field.
    fn delta(&self, before: &Self) -> Self;
}

pub trait DesignDomain {
    type State: Clone + Eq + Hash + Debug;
    /// Ordered so ties can be broken deterministically.
    type Change: Copy + Eq + Hash + Ord + Debug;
    type Outcomes: OutcomeVector;
    type Utility: Clone + Debug;

    /// The distinguished do-nothing change.
    fn noop(&self) -> Self::Change;

    /// Legal changes in `state`, sorted by `Ord`. Always contains `noop()`.
    fn legal_changes(&self, state: &Self::State) -> Result<Vec<Self::Change>>;

    fn is_legal(&self, state: &Self::State, change: Self::Change) -> Result<bool> {
        Ok(self.legal_changes(state)?.contains(&change))
    }

    /// Returns the successor state; `state` is left untouched.
    fn apply(
        &self,
        state: &Self::State,
        change: Self::Change,
        dynamics: Dynamics,
    ) -> Result<Self::State>;

    fn outcomes(&self, state: &Self::State) -> Result<Self::Outcomes>;

    fn utility(&self, params: &Self::Utility, outcomes: &Self::Outcomes) -> f64;

    /// The state every design session starts from.
    fn initial_state(&self) -> Self::State;
}
