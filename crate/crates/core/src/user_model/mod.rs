//! Generative model of a designer choosing design changes.
//!
//! The designer values each change by limited-horizon planning under their own
//! (subjective) dynamics, then chooses in three Boltzmann-rational phases:
//! pick a change, consider switching to the assistant's recommendation, and
//! fall back to doing nothing if the change looks worse than staying put.

pub mod choice;
pub mod insertion;
pub mod lookahead;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::SimRng;

pub use choice::{
    choice_distribution, choice_probabilities, log_likelihood, sample_choice, sample_from_values,
    ChoiceDistribution,
};
pub use lookahead::{lookahead_value, LookaheadTree, QTable};

/// Bounded-rationality parameters of a designer.
///
/// Temperatures are inverse temperatures: larger means more deterministic. An
/// infinite value is the deterministic (argmax) limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserModelParams {
    pub beta_select: f64,
    pub beta_switch: f64,
    pub beta_stop: f64,
    /// Number of further changes the designer looks ahead.
    pub horizon: u32,
}

impl UserModelParams {
    /// The zero-temperature designer.
    pub fn deterministic(horizon: u32) -> Self {
        Self {
            beta_select: f64::INFINITY,
            beta_switch: f64::INFINITY,
            beta_stop: f64::INFINITY,
            horizon,
        }
    }

    pub fn validate(&self, horizon_max: u32) -> Result<()> {
        for (name, beta) in [
            ("beta_select", self.beta_select),
            ("beta_switch", self.beta_switch),
            ("beta_stop", self.beta_stop),
        ] {
            if beta.is_nan() || beta <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {beta}")));
            }
        }
        if self.horizon > horizon_max {
            return Err(Error::InvalidArgument(format!(
                "horizon {} exceeds maximum {horizon_max}",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserModelConfig {
    /// Changes expanded per level of lookahead, ranked by immediate utility.
    pub beam_width: usize,
    pub horizon_max: u32,
}

impl Default for UserModelConfig {
    fn default() -> Self {
        Self {
            beam_width: 10,
            horizon_max: 2,
        }
    }
}

impl UserModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::Config("beam_width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Prior over [`UserModelParams`]: log-uniform temperatures, uniform horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserModelPrior {
    pub beta_min: f64,
    pub beta_max: f64,
    pub horizon_max: u32,
}

impl Default for UserModelPrior {
    fn default() -> Self {
        Self {
            beta_min: 0.5,
            beta_max: 50.0,
            horizon_max: 2,
        }
    }
}

impl UserModelPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max && self.beta_max.is_finite()) {
            return Err(Error::Config(format!(
                "bad temperature range [{}, {}]",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    fn log_uniform(&self, rng: &mut SimRng) -> f64 {
        let (lo, hi) = (self.beta_min.ln(), self.beta_max.ln());
        (lo + (hi - lo) * rng.random::<f64>()).exp()
    }

    pub fn sample(&self, rng: &mut SimRng) -> UserModelParams {
        UserModelParams {
            beta_select: self.log_uniform(rng),
            beta_switch: self.log_uniform(rng),
            beta_stop: self.log_uniform(rng),
            horizon: rng.random_range(0..=self.horizon_max),
        }
    }

    /// Multiplicative perturbation of the temperatures; horizon is kept.
    pub fn jitter(&self, params: &UserModelParams, scale: f64, rng: &mut SimRng) -> UserModelParams {
        let (lo, hi) = (self.beta_min.ln(), self.beta_max.ln());
        let mut nudge = |beta: f64| {
            let step = scale * (hi - lo) * (2.0 * rng.random::<f64>() - 1.0);
            (beta.ln() + step).clamp(lo, hi).exp()
        };
        UserModelParams {
            beta_select: nudge(params.beta_select),
            beta_switch: nudge(params.beta_switch),
            beta_stop: nudge(params.beta_stop),
            horizon: params.horizon,
        }
    }
}

/// One observed design decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceObservation<S, C> {
    pub state_before: S,
    /// The recommendation the designer saw, if any.
    pub recommendation: Option<C>,
    pub chosen: C,
}

#[cfg(test)]
mod tests;
