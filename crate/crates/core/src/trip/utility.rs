//! The designer's two-score trip utility.
//!
//! `U = (1 - w) * enjoy + w * cost`, where
//! `enjoy = (sum_k pref_k * hours_in_category_k - walk_penalty * walking_h) / budget_h`
//! and `cost = -total_cost / cost_scale`. Both scores are O(1) for realistic
//! trips so that temperatures are comparable across hypotheses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assistant::prior::UtilityPrior;
use crate::error::{Error, Result};
use crate::seeding::SimRng;
use crate::trip::{TripConfig, TripOutcomes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripUtilityParams {
    pub cost_weight: f64,
    /// Enjoyment per hour spent at a POI of each category.
    pub category_prefs: Vec<f64>,
    /// Disutility per hour of walking.
    pub walk_penalty: f64,
}

impl TripUtilityParams {
    pub fn validate(&self, n_categories: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cost_weight) {
            return Err(Error::InvalidArgument(format!(
                "cost_weight {} outside [0, 1]",
                self.cost_weight
            )));
        }
        if self.category_prefs.len() != n_categories {
            return Err(Error::InvalidArgument(format!(
                "expected {n_categories} category preferences, got {}",
                self.category_prefs.len()
            )));
        }
        if self.category_prefs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("category preferences must lie in [0, 1]".into()));
        }
        if !(self.walk_penalty.is_finite() && self.walk_penalty >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "walk_penalty {} must be >= 0",
                self.walk_penalty
            )));
        }
        Ok(())
    }
}

pub fn trip_utility(outcomes: &TripOutcomes, params: &TripUtilityParams, config: &TripConfig) -> f64 {
    let enjoyed: f64 = params
        .category_prefs
        .iter()
        .zip(&outcomes.category_hours)
        .map(|(pref, hours)| pref * hours)
        .sum();
    let enjoy = (enjoyed - params.walk_penalty * outcomes.walking_time) / config.duration_budget_h;
    let cost = -outcomes.total_cost / config.cost_scale;
    (1.0 - params.cost_weight) * enjoy + params.cost_weight * cost
}

/// Independent uniform prior over utility parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripUtilityPrior {
    pub n_categories: usize,
    pub walk_penalty_max: f64,
}

impl TripUtilityPrior {
    pub fn new(n_categories: usize) -> Self {
        Self {
            n_categories,
            walk_penalty_max: 1.0,
        }
    }
}

fn nudge(rng: &mut SimRng, value: f64, scale: f64, lo: f64, hi: f64) -> f64 {
    (value + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(lo, hi)
}

impl UtilityPrior for TripUtilityPrior {
    type Utility = TripUtilityParams;

    fn validate(&self) -> Result<()> {
        if self.n_categories == 0 {
            return Err(Error::Config("utility prior needs at least one category".into()));
        }
        if !(self.walk_penalty_max.is_finite() && self.walk_penalty_max >= 0.0) {
            return Err(Error::Config("walk_penalty_max must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut SimRng) -> TripUtilityParams {
        TripUtilityParams {
            cost_weight: rng.random::<f64>(),
            category_prefs: (0..self.n_categories).map(|_| rng.random::<f64>()).collect(),
            walk_penalty: self.walk_penalty_max * rng.random::<f64>(),
        }
    }

    fn jitter(&self, u: &TripUtilityParams, scale: f64, rng: &mut SimRng) -> TripUtilityParams {
        TripUtilityParams {
            cost_weight: nudge(rng, u.cost_weight, scale, 0.0, 1.0),
            category_prefs: u.category_prefs.iter().map(|&p| nudge(rng, p, scale, 0.0, 1.0)).collect(),
            walk_penalty: nudge(rng, u.walk_penalty, scale * self.walk_penalty_max, 0.0, self.walk_penalty_max),
        }
    }
}
