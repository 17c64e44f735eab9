use serde::{Deserialize, Serialize};

use crate::assistant::ParticleSet;
use crate::design::{DesignDomain, Dynamics, OutcomeVector};
use crate::error::Result;

/// What a change would do: the resulting design, its outcomes, the outcome
/// deltas against the current design and the posterior-mean utility delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfReport<S, C, O> {
    pub change: C,
    pub design_after: S,
    pub outcomes_before: O,
    pub outcomes_after: O,
    pub outcome_deltas: O,
    pub expected_utility_delta: f64,
}

pub fn whatif<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    state: &D::State,
    change: D::Change,
) -> Result<WhatIfReport<D::State, D::Change, D::Outcomes>> {
    let after = domain.apply(state, change, Dynamics::Objective)?;
    let outcomes_before = domain.outcomes(state)?;
    let outcomes_after = domain.outcomes(&after)?;
    let expected_utility_delta = ps
        .particles()
        .iter()
        .map(|p| {
            p.log_weight.exp()
                * (domain.utility(&p.utility, &outcomes_after) - domain.utility(&p.utility, &outcomes_before))
        })
        .sum();
    Ok(WhatIfReport {
        change,
        outcome_deltas: outcomes_after.delta(&outcomes_before),
        design_after: after,
        outcomes_before,
        outcomes_after,
        expected_utility_delta,
    })
}
