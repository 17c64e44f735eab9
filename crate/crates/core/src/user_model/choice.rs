//! The three-phase Boltzmann choice process and its closed-form marginal.

use rand::Rng;

use crate::design::DesignDomain;
use crate::error::{Error, Result};
use crate::seeding::SimRng;
use crate::user_model::lookahead::{LookaheadTree, QTable};
use crate::user_model::{ChoiceObservation, UserModelConfig, UserModelParams};

/// Probability that option `a` wins a two-way Boltzmann comparison against
/// `b`, i.e. `sigmoid(beta * (a - b))`. An infinite `beta` is a hard
/// comparison with ties split evenly.
pub fn binary_choice(beta: f64, a: f64, b: f64) -> f64 {
    let diff = a - b;
    if beta.is_infinite() {
        return if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let x = beta * diff;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Boltzmann distribution over `values` with inverse temperature `beta`,
/// computed with max-subtraction. Infinite `beta` is uniform over the argmax.
pub fn softmax(beta: f64, values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if beta.is_infinite() {
        let winners = values.iter().filter(|&&v| v == max).count() as f64;
        return values.iter().map(|&v| if v == max { 1.0 / winners } else { 0.0 }).collect();
    }
    let weights: Vec<f64> = values.iter().map(|&v| (beta * (v - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Marginal probability of each final action given lookahead values.
///
/// `values[noop]` is the value of staying put. `recommendation` is an index
/// into `values`; a recommendation of `noop` is ignored.
pub fn choice_probabilities(
    values: &[f64],
    noop: usize,
    recommendation: Option<usize>,
    params: &UserModelParams,
) -> Vec<f64> {
    let n = values.len();
    let mut probs = vec![0.0; n];
    let options: Vec<usize> = (0..n).filter(|&i| i != noop).collect();
    if options.is_empty() {
        probs[noop] = 1.0;
        return probs;
    }
    let option_values: Vec<f64> = options.iter().map(|&i| values[i]).collect();
    let first = softmax(params.beta_select, &option_values);
    let rec = recommendation.filter(|&r| r != noop);

    // distribution of the action carried into the stop phase
    let mut carried = vec![0.0; n];
    for (&i, &p) in options.iter().zip(&first) {
        match rec {
            Some(r) if r != i => {
                let switch = binary_choice(params.beta_switch, values[r], values[i]);
                carried[r] += p * switch;
                carried[i] += p * (1.0 - switch);
            }
            _ => carried[i] += p,
        }
    }
    let mut stop_mass = 0.0;
    for &i in &options {
        let keep = binary_choice(params.beta_stop, values[i], values[noop]);
        probs[i] = carried[i] * keep;
        stop_mass += carried[i] * binary_choice(params.beta_stop, values[noop], values[i]);
    }
    probs[noop] = stop_mass;
    probs
}

/// Forward-simulates the three phases once.
pub fn sample_from_values(
    values: &[f64],
    noop: usize,
    recommendation: Option<usize>,
    params: &UserModelParams,
    rng: &mut SimRng,
) -> usize {
    let options: Vec<usize> = (0..values.len()).filter(|&i| i != noop).collect();
    if options.is_empty() {
        return noop;
    }
    let option_values: Vec<f64> = options.iter().map(|&i| values[i]).collect();
    let first = softmax(params.beta_select, &option_values);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = *options.last().expect("non-empty");
    for (&i, &p) in options.iter().zip(&first) {
        acc += p;
        if u < acc {
            chosen = i;
            break;
        }
    }
    if let Some(r) = recommendation.filter(|&r| r != noop && r != chosen) {
        if rng.random::<f64>() < binary_choice(params.beta_switch, values[r], values[chosen]) {
            chosen = r;
        }
    }
    if rng.random::<f64>() < binary_choice(params.beta_stop, values[chosen], values[noop]) {
        chosen
    } else {
        noop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution<C> {
    pub changes: Vec<C>,
    pub probs: Vec<f64>,
}

impl<C: Copy + Eq> ChoiceDistribution<C> {
    pub fn from_q(q: &QTable<C>, recommendation: Option<C>, params: &UserModelParams) -> Result<Self> {
        let rec = recommendation_index(q, recommendation)?;
        Ok(Self {
            changes: q.changes.clone(),
            probs: choice_probabilities(&q.values, q.noop, rec, params),
        })
    }

    pub fn prob(&self, change: C) -> f64 {
        self.changes
            .iter()
            .position(|&c| c == change)
            .map_or(0.0, |i| self.probs[i])
    }
}

fn recommendation_index<C: Copy + Eq>(q: &QTable<C>, recommendation: Option<C>) -> Result<Option<usize>> {
    match recommendation {
        None => Ok(None),
        Some(r) => q
            .index_of(r)
            .map(Some)
            .ok_or_else(|| Error::IllegalChange("recommendation is not a legal change".into())),
    }
}

fn q_table<D: DesignDomain>(
    domain: &D,
    state: &D::State,
    utility: &D::Utility,
    params: &UserModelParams,
    config: &UserModelConfig,
) -> Result<QTable<D::Change>> {
    params.validate(config.horizon_max)?;
    LookaheadTree::new(domain, state, config)?.q_table(utility, params)
}

pub fn choice_distribution<D: DesignDomain>(
    domain: &D,
    state: &D::State,
    recommendation: Option<D::Change>,
    utility: &D::Utility,
    params: &UserModelParams,
    config: &UserModelConfig,
) -> Result<ChoiceDistribution<D::Change>> {
    let q = q_table(domain, state, utility, params, config)?;
    ChoiceDistribution::from_q(&q, recommendation, params)
}

pub fn sample_choice<D: DesignDomain>(
    domain: &D,
    state: &D::State,
    recommendation: Option<D::Change>,
    utility: &D::Utility,
    params: &UserModelParams,
    config: &UserModelConfig,
    rng: &mut SimRng,
) -> Result<D::Change> {
    let q = q_table(domain, state, utility, params, config)?;
    let rec = recommendation_index(&q, recommendation)?;
    Ok(q.changes[sample_from_values(&q.values, q.noop, rec, params, rng)])
}

/// Log-probability of the observed change under the model.
pub fn log_likelihood<D: DesignDomain>(
    domain: &D,
    observation: &ChoiceObservation<D::State, D::Change>,
    utility: &D::Utility,
    params: &UserModelParams,
    config: &UserModelConfig,
) -> Result<f64> {
    let q = q_table(domain, &observation.state_before, utility, params, config)?;
    log_likelihood_from_q(&q, observation.recommendation, observation.chosen, params)
}

pub(crate) fn log_likelihood_from_q<C: Copy + Eq + std::fmt::Debug>(
    q: &QTable<C>,
    recommendation: Option<C>,
    chosen: C,
    params: &UserModelParams,
) -> Result<f64> {
    let idx = q
        .index_of(chosen)
        .ok_or_else(|| Error::IllegalChange(format!("observed change {chosen:?} is not legal")))?;
    let rec = recommendation_index(q, recommendation)?;
    let probs = choice_probabilities(&q.values, q.noop, rec, params);
    Ok(probs[idx].ln())
}
