//! The cooperative assistant.
//!
//! It keeps a weighted particle posterior over (utility, user-model)
//! hypotheses, updates it from each observed design decision, and recommends
//! the change with the largest expected immediate gain in the designer's true
//! utility, optionally plus a bonus for the expected information gained.

pub mod particles;
pub mod planning;
pub mod prior;
pub mod whatif;

use serde::{Deserialize, Serialize};

use crate::design::{DesignDomain, Dynamics};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::user_model::choice::choice_probabilities;
use crate::user_model::{ChoiceObservation, LookaheadTree, UserModelConfig, UserModelPrior};

pub use particles::{entropy, log_sum_exp, Particle, ParticleSet};
pub use planning::{expected_info_gain, expected_step_gain, plan_recommendation};
pub use prior::UtilityPrior;
pub use whatif::{whatif, WhatIfReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssistantConfig {
    pub n_particles: usize,
    /// Resample when ESS falls below this fraction of the particle count.
    pub ess_fraction: f64,
    pub resampling: bool,
    /// Rejuvenation step size after resampling; 0 disables it.
    pub jitter_scale: f64,
    pub info_gain_weight: f64,
    /// Per-particle number of top changes considered as recommendations.
    pub candidate_cap: usize,
    pub user_model: UserModelConfig,
}

impl Default for AssistantConfig {
    fn default() -> Self {
        Self {
            n_particles: 256,
            ess_fraction: 0.5,
            resampling: true,
            jitter_scale: 0.0,
            info_gain_weight: 0.0,
            candidate_cap: 15,
            user_model: UserModelConfig::default(),
        }
    }
}

impl AssistantConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::Config("n_particles must be >= 2".into()));
        }
        if !(self.ess_fraction > 0.0 && self.ess_fraction <= 1.0) {
            return Err(Error::Config("ess_fraction must lie in (0, 1]".into()));
        }
        if !(self.jitter_scale.is_finite() && self.jitter_scale >= 0.0) {
            return Err(Error::Config("jitter_scale must be >= 0".into()));
        }
        if !(self.info_gain_weight.is_finite() && self.info_gain_weight >= 0.0) {
            return Err(Error::Config("info_gain_weight must be >= 0".into()));
        }
        if self.candidate_cap == 0 {
            return Err(Error::Config("candidate_cap must be >= 1".into()));
        }
        self.user_model.validate()
    }
}

/// Draws `n_particles` hypotheses i.i.d. from the prior with uniform weights.
pub fn init_posterior<P: UtilityPrior>(
    prior: &P,
    user_prior: &UserModelPrior,
    config: &AssistantConfig,
    seed: u64,
) -> Result<ParticleSet<P::Utility>>
where
    P::Utility: Clone,
{
    config.validate()?;
    prior.validate()?;
    user_prior.validate()?;
    if user_prior.horizon_max > config.user_model.horizon_max {
        return Err(Error::Config("prior horizon exceeds the user model's horizon_max".into()));
    }
    let mut rng = rng_from_seed(seed);
    let hypotheses = (0..config.n_particles)
        .map(|_| {
            let utility = prior.sample(&mut rng);
            let user = user_prior.sample(&mut rng);
            (utility, user)
        })
        .collect();
    ParticleSet::uniform(hypotheses, derive_seed(seed, 1))
}

/// Everything the assistant needs about one state, for every particle.
///
/// Rows are indexed by particle, columns by position in `changes`.
#[derive(Debug, Clone)]
pub struct PosteriorEvaluation<D: DesignDomain> {
    pub state: D::State,
    pub changes: Vec<D::Change>,
    pub noop: usize,
    /// Lookahead values under each particle's subjective planning.
    pub q: Vec<Vec<f64>>,
    /// True (objective) utility change of each change for each particle.
    pub gains: Vec<Vec<f64>>,
}

impl<D: DesignDomain> PosteriorEvaluation<D> {
    pub fn index_of(&self, change: D::Change) -> Option<usize> {
        self.changes.iter().position(|&c| c == change)
    }

    /// Choice probabilities of particle `p` given a recommendation index.
    pub fn choice_probs(
        &self,
        ps: &ParticleSet<D::Utility>,
        p: usize,
        recommendation: Option<usize>,
    ) -> Vec<f64> {
        choice_probabilities(&self.q[p], self.noop, recommendation, &ps.particles()[p].user)
    }
}

/// Evaluates every particle at the tree's root state.
pub fn evaluate_posterior<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    tree: &mut LookaheadTree<'_, D>,
) -> Result<PosteriorEvaluation<D>> {
    let state = tree.root_state().clone();
    let changes = tree.root_changes();
    let noop_change = domain.noop();
    let noop = changes
        .iter()
        .position(|&c| c == noop_change)
        .ok_or_else(|| Error::InvalidState("legal changes lack NoOp".into()))?;
    let before = tree.root_outcomes().clone();
    let after = changes
        .iter()
        .map(|&c| domain.apply(&state, c, Dynamics::Objective).and_then(|s| domain.outcomes(&s)))
        .collect::<Result<Vec<_>>>()?;
    let mut q = Vec::with_capacity(ps.len());
    let mut gains = Vec::with_capacity(ps.len());
    for particle in ps.particles() {
        q.push(tree.q_table(&particle.utility, &particle.user)?.values);
        let base = domain.utility(&particle.utility, &before);
        gains.push(after.iter().map(|o| domain.utility(&particle.utility, o) - base).collect());
    }
    Ok(PosteriorEvaluation {
        state,
        changes,
        noop,
        q,
        gains,
    })
}

/// Per-particle log-likelihood of an observation made at the evaluated state.
pub fn observation_log_likelihoods<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &ParticleSet<D::Utility>,
    obs: &ChoiceObservation<D::State, D::Change>,
) -> Result<Vec<f64>> {
    if obs.state_before != eval.state {
        return Err(Error::InvalidArgument("observation made at a different state".into()));
    }
    let chosen = eval
        .index_of(obs.chosen)
        .ok_or_else(|| Error::IllegalChange(format!("observed change {:?} is not legal", obs.chosen)))?;
    let rec = match obs.recommendation {
        None => None,
        Some(r) => Some(eval.index_of(r).ok_or_else(|| {
            Error::IllegalChange(format!("recommendation {r:?} is not legal"))
        })?),
    };
    Ok((0..ps.len()).map(|p| eval.choice_probs(ps, p, rec)[chosen].ln()).collect())
}

/// Bayes update of the particle weights from one observation, then
/// systematic resampling if the effective sample size collapsed.
pub fn update_posterior<D: DesignDomain>(
    domain: &D,
    ps: &mut ParticleSet<D::Utility>,
    obs: &ChoiceObservation<D::State, D::Change>,
    config: &AssistantConfig,
) -> Result<bool>
where
    D::Utility: Clone,
{
    let mut tree = LookaheadTree::new(domain, &obs.state_before, &config.user_model)?;
    let eval = evaluate_posterior(domain, ps, &mut tree)?;
    update_with_evaluation(&eval, ps, obs, config)
}

/// As [`update_posterior`], reusing an evaluation of `obs.state_before`.
/// Returns whether the set was resampled.
pub fn update_with_evaluation<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &mut ParticleSet<D::Utility>,
    obs: &ChoiceObservation<D::State, D::Change>,
    config: &AssistantConfig,
) -> Result<bool>
where
    D::Utility: Clone,
{
    let log_liks = observation_log_likelihoods(eval, ps, obs)?;
    ps.reweight(&log_liks)?;
    Ok(config.resampling && ps.maybe_resample(config.ess_fraction))
}

/// Stateful assistant for one design session: the posterior plus a cached
/// evaluation of the current state.
#[derive(Debug, Clone)]
pub struct Assistant<D: DesignDomain, P: UtilityPrior<Utility = D::Utility>> {
    posterior: ParticleSet<D::Utility>,
    prior: P,
    user_prior: UserModelPrior,
    config: AssistantConfig,
    cache: Option<PosteriorEvaluation<D>>,
}

impl<D, P> Assistant<D, P>
where
    D: DesignDomain,
    D::Utility: Clone,
    P: UtilityPrior<Utility = D::Utility>,
{
    pub fn new(prior: P, user_prior: UserModelPrior, config: AssistantConfig, seed: u64) -> Result<Self> {
        let posterior = init_posterior(&prior, &user_prior, &config, seed)?;
        Ok(Self::with_posterior(posterior, prior, user_prior, config))
    }

    pub fn with_posterior(
        posterior: ParticleSet<D::Utility>,
        prior: P,
        user_prior: UserModelPrior,
        config: AssistantConfig,
    ) -> Self {
        Self {
            posterior,
            prior,
            user_prior,
            config,
            cache: None,
        }
    }

    pub fn posterior(&self) -> &ParticleSet<D::Utility> {
        &self.posterior
    }

    pub fn config(&self) -> &AssistantConfig {
        &self.config
    }

    /// Evaluates the posterior at the root of an existing lookahead tree,
    /// so the tree can be shared with other consumers (e.g. a simulated user).
    pub fn prepare(&mut self, domain: &D, tree: &mut LookaheadTree<'_, D>) -> Result<()> {
        if self.cache.as_ref().is_some_and(|c| &c.state == tree.root_state()) {
            return Ok(());
        }
        self.cache = Some(evaluate_posterior(domain, &self.posterior, tree)?);
        Ok(())
    }

    pub fn evaluation(&mut self, domain: &D, state: &D::State) -> Result<&PosteriorEvaluation<D>> {
        if !self.cache.as_ref().is_some_and(|c| &c.state == state) {
            let mut tree = LookaheadTree::new(domain, state, &self.config.user_model)?;
            self.cache = Some(evaluate_posterior(domain, &self.posterior, &mut tree)?);
        }
        Ok(self.cache.as_ref().expect("cache filled"))
    }

    /// The recommended change, or `None` when nothing but `NoOp` is legal.
    pub fn recommend(&mut self, domain: &D, state: &D::State) -> Result<Option<D::Change>> {
        self.evaluation(domain, state)?;
        let eval = self.cache.as_ref().expect("cache filled");
        Ok(planning::plan_from_evaluation(eval, &self.posterior, &self.config))
    }

    pub fn observe(&mut self, domain: &D, obs: &ChoiceObservation<D::State, D::Change>) -> Result<()> {
        self.evaluation(domain, &obs.state_before)?;
        let eval = self.cache.as_ref().expect("cache filled");
        let resampled = update_with_evaluation(eval, &mut self.posterior, obs, &self.config)?;
        if resampled {
            // rows of the cached evaluation no longer line up with particles
            self.cache = None;
            if self.config.jitter_scale > 0.0 {
                let scale = self.config.jitter_scale;
                let (prior, user_prior) = (&self.prior, &self.user_prior);
                self.posterior.rejuvenate(|p, rng| {
                    p.utility = prior.jitter(&p.utility, scale, rng);
                    p.user = user_prior.jitter(&p.user, scale, rng);
                });
            }
        }
        Ok(())
    }
}
