//! Choosing what to recommend.

use std::collections::BTreeSet;

use crate::assistant::particles::entropy;
use crate::assistant::{evaluate_posterior, AssistantConfig, ParticleSet, PosteriorEvaluation};
use crate::design::DesignDomain;
use crate::error::{Error, Result};
use crate::user_model::LookaheadTree;

fn rec_index<D: DesignDomain>(eval: &PosteriorEvaluation<D>, rec: Option<D::Change>) -> Result<Option<usize>> {
    match rec {
        None => Ok(None),
        Some(r) => eval
            .index_of(r)
            .map(Some)
            .ok_or_else(|| Error::IllegalChange(format!("candidate {r:?} is not legal"))),
    }
}

/// Posterior-expected change in true utility after the designer reacts to
/// recommendation `rec` (an index into `eval.changes`).
pub fn step_gain_at<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &ParticleSet<D::Utility>,
    rec: Option<usize>,
) -> f64 {
    let mut total = 0.0;
    for (p, particle) in ps.particles().iter().enumerate() {
        let probs = eval.choice_probs(ps, p, rec);
        let inner: f64 = probs.iter().zip(&eval.gains[p]).map(|(pr, g)| pr * g).sum();
        total += particle.log_weight.exp() * inner;
    }
    total
}

/// Expected reduction in the entropy of the particle weights from observing
/// the designer's response to `rec`.
pub fn info_gain_at<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &ParticleSet<D::Utility>,
    rec: Option<usize>,
) -> f64 {
    let weights = ps.weights();
    let per_particle: Vec<Vec<f64>> = (0..ps.len()).map(|p| eval.choice_probs(ps, p, rec)).collect();
    let mut expected_posterior_entropy = 0.0;
    let mut joint = vec![0.0; ps.len()];
    for a in 0..eval.changes.len() {
        for (j, (w, probs)) in joint.iter_mut().zip(weights.iter().zip(&per_particle)) {
            *j = w * probs[a];
        }
        let marginal: f64 = joint.iter().sum();
        if marginal <= 0.0 {
            continue;
        }
        let posterior: Vec<f64> = joint.iter().map(|j| j / marginal).collect();
        expected_posterior_entropy += marginal * entropy(&posterior);
    }
    entropy(&weights) - expected_posterior_entropy
}

/// Candidate recommendations: the union over particles of each particle's
/// `candidate_cap` best non-NoOp changes by lookahead value.
pub fn candidate_indices<D: DesignDomain>(eval: &PosteriorEvaluation<D>, cap: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for q in &eval.q {
        let mut ranked: Vec<usize> = (0..q.len()).filter(|&i| i != eval.noop).collect();
        ranked.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
        out.extend(ranked.into_iter().take(cap));
    }
    out
}

/// Score of each candidate index, in ascending index order.
pub fn candidate_scores<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &ParticleSet<D::Utility>,
    config: &AssistantConfig,
) -> Vec<(usize, f64)> {
    candidate_indices(eval, config.candidate_cap)
        .into_iter()
        .map(|i| {
            let mut score = step_gain_at(eval, ps, Some(i));
            if config.info_gain_weight > 0.0 {
                score += config.info_gain_weight * info_gain_at(eval, ps, Some(i));
            }
            (i, score)
        })
        .collect()
}

/// Highest-scoring candidate; ties go to the smallest change in `Ord` order.
pub fn plan_from_evaluation<D: DesignDomain>(
    eval: &PosteriorEvaluation<D>,
    ps: &ParticleSet<D::Utility>,
    config: &AssistantConfig,
) -> Option<D::Change> {
    let mut best: Option<(usize, f64)> = None;
    for (i, score) in candidate_scores(eval, ps, config) {
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| eval.changes[i])
}

fn evaluate<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    state: &D::State,
    config: &AssistantConfig,
) -> Result<PosteriorEvaluation<D>> {
    let mut tree = LookaheadTree::new(domain, state, &config.user_model)?;
    evaluate_posterior(domain, ps, &mut tree)
}

/// Expected true-utility gain of recommending `candidate` (or nothing).
pub fn expected_step_gain<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    state: &D::State,
    candidate: Option<D::Change>,
    config: &AssistantConfig,
) -> Result<f64> {
    let eval = evaluate(domain, ps, state, config)?;
    let rec = rec_index(&eval, candidate)?;
    Ok(step_gain_at(&eval, ps, rec))
}

pub fn expected_info_gain<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    state: &D::State,
    candidate: Option<D::Change>,
    config: &AssistantConfig,
) -> Result<f64> {
    let eval = evaluate(domain, ps, state, config)?;
    let rec = rec_index(&eval, candidate)?;
    Ok(info_gain_at(&eval, ps, rec))
}

/// The change to recommend at `state`, or `None` if only `NoOp` is legal.
pub fn plan_recommendation<D: DesignDomain>(
    domain: &D,
    ps: &ParticleSet<D::Utility>,
    state: &D::State,
    config: &AssistantConfig,
) -> Result<Option<D::Change>> {
    let eval = evaluate(domain, ps, state, config)?;
    Ok(plan_from_evaluation(&eval, ps, config))
}
