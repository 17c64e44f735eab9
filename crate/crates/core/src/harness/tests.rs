use super::*;
use crate::design::DesignDomain;
use crate::trip::TripDesign;

fn small(n_iterations: usize, n_runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_pois: 15,
        n_iterations,
        n_runs,
        seed: 11,
        assistant: AssistantConfig {
            n_particles: 32,
            ..AssistantConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn zero_iterations_give_an_empty_trace() {
    let trace = run_single(&small(0, 2), 5).unwrap();
    assert!(trace.records.is_empty());
    assert!(trace.utilities().is_empty());
}

#[test]
fn traces_have_one_record_per_iteration() {
    let trace = run_single(&small(7, 2), 5).unwrap();
    assert_eq!(trace.records.len(), 7);
    for (i, r) in trace.records.iter().enumerate() {
        assert_eq!(r.iteration, i + 1);
        assert!(r.true_utility.is_finite());
        assert!(r.posterior_entropy.is_some());
        assert!(r.recommendation.is_none_or(|c| c != TripChange::NoOp));
    }
}

#[test]
fn greedy_unassisted_designer_never_gets_worse() {
    let config = ExperimentConfig {
        assisted: false,
        n_pois: 20,
        n_iterations: 25,
        designer_override: Some(UserModelParams::deterministic(0)),
        ..small(25, 2)
    };
    for seed in 0..6 {
        let trace = run_single(&config, seed).unwrap();
        let city = City::generate(config.n_pois, trace.city_seed, &config.city).unwrap();
        let domain = TripDomain::new(&city, config.trip_config()).unwrap();
        let u = &trace.designer_utility;
        let mut state = TripDesign::empty();
        let mut current = 0.0;
        for r in &trace.records {
            // the step oracle: best change under the designer's own routing
            let best = domain
                .legal_changes(&state)
                .unwrap()
                .into_iter()
                .filter(|&c| c != TripChange::NoOp)
                .map(|c| {
                    let s = domain.apply(&state, c, Dynamics::Subjective).unwrap();
                    domain.trip_utility(&domain.trip_outcomes(&s).unwrap(), u)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let now = domain.trip_utility(&domain.trip_outcomes(&state).unwrap(), u);
            if best > now {
                assert_ne!(r.chosen, TripChange::NoOp);
                let s = domain.apply(&state, r.chosen, Dynamics::Subjective).unwrap();
                assert_eq!(domain.trip_utility(&domain.trip_outcomes(&s).unwrap(), u), best);
            } else if best < now {
                assert_eq!(r.chosen, TripChange::NoOp);
            }
            state = domain.apply(&state, r.chosen, Dynamics::Objective).unwrap();
            assert_eq!(state.tour, r.trip);
            assert!(r.true_utility >= current - 1e-12, "utility fell at iteration {}", r.iteration);
            current = r.true_utility;
        }
    }
}

#[test]
fn arms_share_city_and_designer() {
    let assisted = run_single(&small(4, 2), 99).unwrap();
    let unassisted = run_single(&ExperimentConfig { assisted: false, ..small(4, 2) }, 99).unwrap();
    assert_eq!(assisted.city_seed, unassisted.city_seed);
    assert_eq!(assisted.designer_utility, unassisted.designer_utility);
    assert_eq!(assisted.designer_user, unassisted.designer_user);
    assert_eq!(assisted.arm, Arm::Assisted);
    assert_eq!(unassisted.arm, Arm::Unassisted);
    assert!(unassisted.records.iter().all(|r| r.recommendation.is_none() && r.posterior_entropy.is_none()));
}

#[test]
fn identical_traces_have_zero_stderr() {
    let trace = run_single(&small(5, 2), 3).unwrap();
    let result = ExperimentResult {
        n_iterations: 5,
        arms: vec![(Arm::Assisted, vec![trace.clone(), trace])],
    };
    let rows = result.aggregate();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.stderr == 0.0 && r.n_runs == 2));
}

#[test]
fn mean_and_stderr_by_hand() {
    let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 6.0]);
    // sample variance 14/3 over 4 runs
    assert_eq!(m, 3.0);
    assert!((se - (14.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
}

#[test]
fn doubling_runs_keeps_the_first_half() {
    let base = run_experiment(&small(4, 2), &[Arm::Unassisted]).unwrap();
    let doubled = run_experiment(&small(4, 4), &[Arm::Unassisted]).unwrap();
    let a = base.traces(Arm::Unassisted).unwrap();
    let b = doubled.traces(Arm::Unassisted).unwrap();
    assert_eq!(a, &b[..2]);
}

#[test]
fn csv_has_one_row_per_iteration_and_arm() {
    let result = run_experiment(&small(5, 2), &[Arm::Assisted, Arm::Unassisted, Arm::Assisted]).unwrap();
    let csv = result.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,arm,mean_utility,stderr,n_runs");
    assert_eq!(lines.len(), 1 + 2 * 5);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert_eq!(run_experiment(&small(5, 2), &[Arm::Assisted, Arm::Unassisted]).unwrap().to_csv(), csv);
}

#[test]
fn files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&small(3, 2), &[Arm::Assisted, Arm::Unassisted]).unwrap();
    result.write_csv(dir.path().join("r.csv")).unwrap();
    result.write_trace(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("r.csv")).unwrap(), result.to_csv());
    let trace = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 2 * 2 * 3);
    for line in trace.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn single_run_experiments_are_rejected() {
    assert!(matches!(run_experiment(&small(3, 1), &[Arm::Assisted]), Err(Error::Config(_))));
    assert!(matches!(run_experiment(&small(3, 2), &[]), Err(Error::Config(_))));
}

#[test]
fn posterior_entropy_falls_on_average() {
    let result = run_experiment(&small(10, 4), &[Arm::Assisted]).unwrap();
    let traces = result.traces(Arm::Assisted).unwrap();
    let initial: f64 = traces.iter().map(|t| t.initial_entropy.unwrap()).sum::<f64>() / 4.0;
    let last: f64 = traces.iter().map(|t| t.records.last().unwrap().posterior_entropy.unwrap()).sum::<f64>() / 4.0;
    assert!(last < initial, "{last} !< {initial}");
}
