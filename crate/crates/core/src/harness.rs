//! Batch experiments comparing assisted and unassisted simulated designers.
//!
//! Each run draws a city and a ground-truth designer from the run seed; the
//! assisted and unassisted arms of a run share both, so the comparison is
//! paired. Runs are independent and may be evaluated in parallel.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assistant::{Assistant, AssistantConfig};
use crate::design::{DesignDomain, Dynamics};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::trip::{City, CityConfig, PoiId, TripChange, TripConfig, TripDomain, TripUtilityParams, TripUtilityPrior};
use crate::user_model::{
    sample_from_values, ChoiceObservation, LookaheadTree, QTable, UserModelParams, UserModelPrior,
};
use crate::UtilityPrior;

const STREAM_CITY: u64 = 1;
const STREAM_DESIGNER: u64 = 2;
const STREAM_CHOICES: u64 = 3;
const STREAM_ASSISTANT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_pois: usize,
    pub n_iterations: usize,
    pub n_runs: usize,
    pub duration_budget_h: f64,
    pub seed: u64,
    /// Arm simulated by [`run_single`].
    pub assisted: bool,
    pub assistant: AssistantConfig,
    pub city: CityConfig,
    pub trip: TripConfig,
    pub user_prior: UserModelPrior,
    pub walk_penalty_max: f64,
    /// Fixes the simulated designers' rationality parameters instead of
    /// drawing them from `user_prior`. Utilities are still drawn.
    pub designer_override: Option<UserModelParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_pois: 100,
            n_iterations: 100,
            n_runs: 200,
            duration_budget_h: 12.0,
            seed: 0,
            assisted: true,
            assistant: AssistantConfig::default(),
            city: CityConfig::default(),
            trip: TripConfig::default(),
            user_prior: UserModelPrior::default(),
            walk_penalty_max: 1.0,
            designer_override: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pois == 0 {
            return Err(Error::Config("n_pois must be >= 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        if !(self.duration_budget_h.is_finite() && self.duration_budget_h > 0.0) {
            return Err(Error::Config("duration budget must be > 0".into()));
        }
        self.assistant.validate()?;
        self.city.validate()?;
        self.trip_config().validate()?;
        self.user_prior.validate()?;
        if let Some(designer) = &self.designer_override {
            designer.validate(self.assistant.user_model.horizon_max)?;
        }
        self.utility_prior().validate()
    }

    pub fn trip_config(&self) -> TripConfig {
        TripConfig {
            duration_budget_h: self.duration_budget_h,
            ..self.trip.clone()
        }
    }

    pub fn utility_prior(&self) -> TripUtilityPrior {
        TripUtilityPrior {
            n_categories: self.city.n_categories,
            walk_penalty_max: self.walk_penalty_max,
        }
    }

    /// Seed of run `index`; independent of `n_runs`.
    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Assisted,
    Unassisted,
}

impl Arm {
    pub fn name(&self) -> &'static str {
        match self {
            Arm::Assisted => "assisted",
            Arm::Unassisted => "unassisted",
        }
    }

    fn is_assisted(&self) -> bool {
        matches!(self, Arm::Assisted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub chosen: TripChange,
    pub recommendation: Option<TripChange>,
    /// Ground-truth utility of the trip after this iteration's change.
    pub true_utility: f64,
    /// Entropy of the assistant's particle weights after updating; absent
    /// in unassisted runs.
    pub posterior_entropy: Option<f64>,
    pub trip: Vec<PoiId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_seed: u64,
    pub arm: Arm,
    pub city_seed: u64,
    pub designer_utility: TripUtilityParams,
    pub designer_user: UserModelParams,
    /// Entropy of the prior particle weights (assisted runs).
    pub initial_entropy: Option<f64>,
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn utilities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.true_utility).collect()
    }
}

/// Simulates one designer for `n_iterations`, with or without the assistant
/// according to `config.assisted`.
pub fn run_single(config: &ExperimentConfig, run_seed: u64) -> Result<RunTrace> {
    let arm = if config.assisted {
        Arm::Assisted
    } else {
        Arm::Unassisted
    };
    run_arm(config, run_seed, arm)
}

fn run_arm(config: &ExperimentConfig, run_seed: u64, arm: Arm) -> Result<RunTrace> {
    config.validate()?;
    let city_seed = derive_seed(run_seed, STREAM_CITY);
    let city = City::generate(config.n_pois, city_seed, &config.city)?;
    let domain = TripDomain::new(&city, config.trip_config())?;
    let utility_prior = config.utility_prior();

    let mut designer_rng = rng_from_seed(derive_seed(run_seed, STREAM_DESIGNER));
    let truth_utility = utility_prior.sample(&mut designer_rng);
    let sampled_user = config.user_prior.sample(&mut designer_rng);
    let truth_user = config.designer_override.clone().unwrap_or(sampled_user);
    let mut choice_rng = rng_from_seed(derive_seed(run_seed, STREAM_CHOICES));

    let mut assistant = if arm.is_assisted() {
        Some(Assistant::<TripDomain, _>::new(
            utility_prior,
            config.user_prior.clone(),
            config.assistant.clone(),
            derive_seed(run_seed, STREAM_ASSISTANT),
        )?)
    } else {
        None
    };
    let initial_entropy = assistant.as_ref().map(|a| a.posterior().entropy());

    let mut state = domain.initial_state();
    let mut tree = LookaheadTree::new(&domain, &state, &config.assistant.user_model)?;
    let mut designer_q: QTable<TripChange> = tree.q_table(&truth_utility, &truth_user)?;
    let mut records = Vec::with_capacity(config.n_iterations);
    for iteration in 1..=config.n_iterations {
        let recommendation = match assistant.as_mut() {
            Some(a) => {
                a.prepare(&domain, &mut tree)?;
                a.recommend(&domain, &state)?
            }
            None => None,
        };
        let rec_idx = recommendation.and_then(|r| designer_q.index_of(r));
        let chosen_idx =
            sample_from_values(&designer_q.values, designer_q.noop, rec_idx, &truth_user, &mut choice_rng);
        let chosen = designer_q.changes[chosen_idx];
        let next = domain.apply(&state, chosen, Dynamics::Objective)?;

        let posterior_entropy = match assistant.as_mut() {
            Some(a) => {
                a.observe(
                    &domain,
                    &ChoiceObservation {
                        state_before: state.clone(),
                        recommendation,
                        chosen,
                    },
                )?;
                Some(a.posterior().entropy())
            }
            None => None,
        };

        if next != state {
            state = next;
            tree = LookaheadTree::new(&domain, &state, &config.assistant.user_model)?;
            designer_q = tree.q_table(&truth_utility, &truth_user)?;
        }
        let true_utility = domain.utility(&truth_utility, &domain.outcomes(&state)?);
        records.push(IterationRecord {
            iteration,
            chosen,
            recommendation,
            true_utility,
            posterior_entropy,
            trip: state.tour.clone(),
        });
    }
    Ok(RunTrace {
        run_seed,
        arm,
        city_seed,
        designer_utility: truth_utility,
        designer_user: truth_user,
        initial_entropy,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iteration: usize,
    pub arm: Arm,
    pub mean_utility: f64,
    pub stderr: f64,
    pub n_runs: usize,
}

/// Sample mean and standard error of the mean (n - 1 denominator).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub n_iterations: usize,
    /// Traces per arm, ordered by run index.
    pub arms: Vec<(Arm, Vec<RunTrace>)>,
}

impl ExperimentResult {
    pub fn traces(&self, arm: Arm) -> Option<&[RunTrace]> {
        self.arms.iter().find(|(a, _)| *a == arm).map(|(_, t)| t.as_slice())
    }

    /// Utilities of every run of `arm` at 1-based `iteration`.
    pub fn utilities_at(&self, arm: Arm, iteration: usize) -> Vec<f64> {
        self.traces(arm)
            .map(|ts| ts.iter().map(|t| t.records[iteration - 1].true_utility).collect())
            .unwrap_or_default()
    }

    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for iteration in 1..=self.n_iterations {
            for (arm, traces) in &self.arms {
                let values = self.utilities_at(*arm, iteration);
                let (mean_utility, stderr) = mean_and_stderr(&values);
                rows.push(AggregateRow {
                    iteration,
                    arm: *arm,
                    mean_utility,
                    stderr,
                    n_runs: traces.len(),
                });
            }
        }
        rows
    }

    /// Mean and standard error of the per-run assisted minus unassisted
    /// utility at `iteration`.
    pub fn paired_difference(&self, iteration: usize) -> Option<(f64, f64)> {
        let a = self.utilities_at(Arm::Assisted, iteration);
        let u = self.utilities_at(Arm::Unassisted, iteration);
        if a.is_empty() || a.len() != u.len() {
            return None;
        }
        let diffs: Vec<f64> = a.iter().zip(&u).map(|(x, y)| x - y).collect();
        Some(mean_and_stderr(&diffs))
    }

    /// Results table: `iteration,arm,mean_utility,stderr,n_runs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,arm,mean_utility,stderr,n_runs\n");
        for row in self.aggregate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.iteration,
                row.arm.name(),
                row.mean_utility,
                row.stderr,
                row.n_runs
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// One JSON object per (run, iteration), for debugging.
    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            arm: Arm,
            run: usize,
            run_seed: u64,
            #[serde(flatten)]
            record: &'a IterationRecord,
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (arm, traces) in &self.arms {
            for (run, trace) in traces.iter().enumerate() {
                for record in &trace.records {
                    let line = Line {
                        arm: *arm,
                        run,
                        run_seed: trace.run_seed,
                        record,
                    };
                    serde_json::to_writer(&mut file, &line)?;
                    file.write_all(b"\n")?;
                }
            }
        }
        file.flush()?;
        Ok(())
    }

    /// Final-iteration mean and 2 SE per arm, as a one-line summary.
    pub fn summary(&self) -> String {
        if self.n_iterations == 0 {
            return "no iterations".into();
        }
        let mut parts: Vec<String> = self
            .arms
            .iter()
            .map(|(arm, _)| {
                let (m, se) = mean_and_stderr(&self.utilities_at(*arm, self.n_iterations));
                format!("{} {:.4} ± {:.4}", arm.name(), m, 2.0 * se)
            })
            .collect();
        if let Some((d, se)) = self.paired_difference(self.n_iterations) {
            parts.push(format!("paired difference {:.4} ± {:.4}", d, 2.0 * se));
        }
        format!("final utility (mean ± 2 SE): {}", parts.join("; "))
    }
}

/// Runs every arm in `arms` for `config.n_runs` paired runs.
pub fn run_experiment(config: &ExperimentConfig, arms: &[Arm]) -> Result<ExperimentResult> {
    config.validate()?;
    if config.n_runs < 2 {
        return Err(Error::Config("an experiment needs n_runs >= 2".into()));
    }
    if arms.is_empty() {
        return Err(Error::Config("no experiment arm selected".into()));
    }
    let mut unique: Vec<Arm> = Vec::new();
    for &arm in arms {
        if !unique.contains(&arm) {
            unique.push(arm);
        }
    }
    let jobs: Vec<(Arm, usize)> = unique
        .iter()
        .flat_map(|&arm| (0..config.n_runs).map(move |run| (arm, run)))
        .collect();
    let traces: Vec<RunTrace> = jobs
        .par_iter()
        .map(|&(arm, run)| run_arm(config, config.run_seed(run), arm))
        .collect::<Result<_>>()?;
    let mut by_arm: Vec<(Arm, Vec<RunTrace>)> = unique.iter().map(|&a| (a, Vec::new())).collect();
    for ((arm, _), trace) in jobs.into_iter().zip(traces) {
        by_arm
            .iter_mut()
            .find(|(a, _)| *a == arm)
            .expect("arm present")
            .1
            .push(trace);
    }
    Ok(ExperimentResult {
        n_iterations: config.n_iterations,
        arms: by_arm,
    })
}

#[cfg(test)]
mod tests;
