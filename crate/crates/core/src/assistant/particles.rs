//! Weighted particle approximation of the posterior over designer hypotheses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{rng_from_seed, SimRng};
use crate::user_model::UserModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<U> {
    pub utility: U,
    pub user: UserModelParams,
    pub log_weight: f64,
    /// Identity of the hypothesis; copies made by resampling share it.
    pub hypothesis: usize,
}

/// Particles with log-weights that are kept normalized (log-sum-exp = 0).
#[derive(Debug, Clone)]
pub struct ParticleSet<U> {
    particles: Vec<Particle<U>>,
    rng: SimRng,
    next_hypothesis: usize,
}

/// Log-sum-exp, summed in index order.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Shannon entropy (nats) of a normalized weight vector.
pub fn entropy(weights: &[f64]) -> f64 {
    -weights.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>()
}

impl<U: Clone> ParticleSet<U> {
    /// Builds a set from hypotheses with uniform weights.
    pub fn uniform(hypotheses: Vec<(U, UserModelParams)>, seed: u64) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::Config("a particle set needs at least one particle".into()));
        }
        let n = hypotheses.len();
        let log_w = -(n as f64).ln();
        let particles = hypotheses
            .into_iter()
            .enumerate()
            .map(|(hypothesis, (utility, user))| Particle {
                utility,
                user,
                log_weight: log_w,
                hypothesis,
            })
            .collect();
        Ok(Self {
            particles,
            rng: rng_from_seed(seed),
            next_hypothesis: n,
        })
    }

    /// Builds a set with the given (unnormalized) log-weights.
    pub fn from_particles(particles: Vec<Particle<U>>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Config("a particle set needs at least one particle".into()));
        }
        if particles.iter().any(|p| p.log_weight.is_nan() || p.log_weight == f64::INFINITY) {
            return Err(Error::Config("particle log-weights must be finite".into()));
        }
        let next_hypothesis = particles.iter().map(|p| p.hypothesis + 1).max().unwrap_or(0);
        let mut set = Self {
            particles,
            rng: rng_from_seed(seed),
            next_hypothesis,
        };
        set.normalize()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle<U>] {
        &self.particles
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    /// Weight of each distinct hypothesis, ordered by hypothesis id.
    pub fn hypothesis_weights(&self) -> Vec<(usize, f64)> {
        let mut merged = std::collections::BTreeMap::new();
        for p in &self.particles {
            *merged.entry(p.hypothesis).or_insert(0.0) += p.log_weight.exp();
        }
        merged.into_iter().collect()
    }

    /// Entropy (nats) of the posterior over distinct hypotheses.
    pub fn entropy(&self) -> f64 {
        let w: Vec<f64> = self.hypothesis_weights().into_iter().map(|(_, w)| w).collect();
        entropy(&w)
    }

    /// Effective sample size `1 / sum w^2`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights().iter().map(|w| w * w).sum::<f64>()
    }

    /// Index of the heaviest particle (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.particles.iter().enumerate() {
            if p.log_weight > self.particles[best].log_weight {
                best = i;
            }
        }
        best
    }

    fn normalize(&mut self) -> Result<()> {
        let total = log_sum_exp(self.particles.iter().map(|p| p.log_weight));
        if !total.is_finite() {
            return Err(Error::DegeneratePosterior("every particle has zero weight".into()));
        }
        for p in &mut self.particles {
            p.log_weight -= total;
        }
        Ok(())
    }

    /// Adds per-particle log-likelihoods and renormalizes. On a degenerate
    /// update (all likelihoods zero) the weights are left unchanged.
    pub fn reweight(&mut self, log_likelihoods: &[f64]) -> Result<()> {
        assert_eq!(log_likelihoods.len(), self.particles.len());
        if log_likelihoods.iter().any(|l| l.is_nan() || *l > 1e-12) {
            return Err(Error::InvalidArgument("log-likelihoods must be <= 0".into()));
        }
        let total = log_sum_exp(
            self.particles.iter().zip(log_likelihoods).map(|(p, l)| p.log_weight + l),
        );
        if !total.is_finite() {
            return Err(Error::DegeneratePosterior(
                "observation has zero probability under every particle".into(),
            ));
        }
        for (p, l) in self.particles.iter_mut().zip(log_likelihoods) {
            p.log_weight = p.log_weight + l - total;
        }
        Ok(())
    }

    /// Systematic resampling to uniform weights.
    pub fn resample_systematic(&mut self) {
        let n = self.particles.len();
        let weights = self.weights();
        let offset: f64 = self.rng.random();
        let mut picks = Vec::with_capacity(n);
        let mut cumulative = weights[0];
        let mut j = 0;
        for i in 0..n {
            let target = (i as f64 + offset) / n as f64;
            while target > cumulative && j + 1 < n {
                j += 1;
                cumulative += weights[j];
            }
            picks.push(j);
        }
        let log_w = -(n as f64).ln();
        self.particles = picks
            .into_iter()
            .map(|j| Particle {
                log_weight: log_w,
                ..self.particles[j].clone()
            })
            .collect();
    }

    /// Resamples when ESS drops below `ess_fraction * n`. Returns whether it did.
    pub fn maybe_resample(&mut self, ess_fraction: f64) -> bool {
        if self.ess() < ess_fraction * self.particles.len() as f64 {
            self.resample_systematic();
            true
        } else {
            false
        }
    }

    /// Perturbs every particle's parameters in place.
    /// Every perturbed particle becomes a new hypothesis.
    pub fn rejuvenate(&mut self, mut perturb: impl FnMut(&mut Particle<U>, &mut SimRng)) {
        for p in &mut self.particles {
            perturb(p, &mut self.rng);
            p.hypothesis = self.next_hypothesis;
            self.next_hypothesis += 1;
        }
    }
}
