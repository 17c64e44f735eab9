use super::*;
use crate::assistant::UtilityPrior;
use crate::design::{DesignDomain, Dynamics};
use crate::seeding::rng_from_seed;
use crate::trip::routing::Point;
use crate::trip::{City, CityConfig, TripChange, TripConfig, TripDesign, TripDomain, TripUtilityParams, TripUtilityPrior};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(select: f64, switch: f64, stop: f64) -> UserModelParams {
    UserModelParams {
        beta_select: select,
        beta_switch: switch,
        beta_stop: stop,
        horizon: 0,
    }
}

fn small_domain(n: usize, seed: u64) -> TripDomain {
    TripDomain::new(&City::generate(n, seed, &CityConfig::default()).unwrap(), TripConfig::default()).unwrap()
}

fn utility(seed: u64) -> TripUtilityParams {
    TripUtilityPrior::new(5).sample(&mut rng_from_seed(seed))
}

/// Angle at `p` by the law of cosines.
fn cosine_angle(p: Point, a: Point, b: Point) -> f64 {
    let d = |x: Point, y: Point| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
    let (pa, pb, ab) = (d(p, a), d(p, b), d(a, b));
    ((pa * pa + pb * pb - ab * ab) / (2.0 * pa * pb)).clamp(-1.0, 1.0).acos()
}

/// Best achievable slot angle over every consecutive pair of the closed tour.
fn brute_force_best_angle(tour: &[Point], p: Point) -> f64 {
    (0..tour.len())
        .map(|i| cosine_angle(p, tour[i], tour[(i + 1) % tour.len()]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Full max-tree without truncation, built only from the domain interface.
fn exhaustive_value(d: &TripDomain, s: &TripDesign, u: &TripUtilityParams, depth: u32) -> f64 {
    if depth == 0 {
        return d.utility(u, &d.outcomes(s).unwrap());
    }
    d.legal_changes(s)
        .unwrap()
        .into_iter()
        .map(|c| exhaustive_value(d, &d.apply(s, c, Dynamics::Subjective).unwrap(), u, depth - 1))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn insertion_into_short_tours() {
    let d = small_domain(6, 3);
    assert_eq!(d.subjective_insert(&[], 4).unwrap(), vec![4]);
    assert_eq!(d.subjective_insert(&[1], 4).unwrap(), vec![1, 4]);
    assert!(matches!(d.subjective_insert(&[1, 4], 4), Err(crate::Error::InvalidArgument(_))));
}

#[test]
fn collinear_insertion_goes_between() {
    let city = crate::trip::tests::city_from(
        &[(0.0, 0.0, 0, 1.0, 0.0), (4.0, 0.0, 0, 1.0, 0.0), (2.0, 0.0, 0, 1.0, 0.0), (2.0, 5.0, 0, 1.0, 0.0)],
        1,
    );
    let d = TripDomain::new(&city, TripConfig::default()).unwrap();
    assert_eq!(d.subjective_insert(&[0, 1, 3], 2).unwrap(), vec![0, 2, 1, 3]);
}

#[test]
fn insertion_matches_slot_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let tour: Vec<Point> = (0..6).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
        let p = [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
        let pos = insertion::max_angle_position(&tour, p, true);
        assert!((1..=6).contains(&pos));
        let chosen = cosine_angle(p, tour[pos - 1], tour[pos % 6]);
        assert!((chosen - brute_force_best_angle(&tour, p)).abs() < 1e-9);
    }
}

#[test]
fn horizon_zero_is_post_change_utility() {
    let d = small_domain(8, 11);
    let u = utility(1);
    let s = d.apply(&TripDesign::empty(), TripChange::Add(2), Dynamics::Objective).unwrap();
    let cfg = UserModelConfig::default();
    for c in d.legal_changes(&s).unwrap() {
        let q = lookahead_value(&d, &s, c, &u, &UserModelParams::deterministic(0), &cfg).unwrap();
        let after = d.apply(&s, c, Dynamics::Subjective).unwrap();
        assert_eq!(q, d.utility(&u, &d.outcomes(&after).unwrap()));
    }
}

#[test]
fn deeper_lookahead_never_lowers_value() {
    let d = small_domain(8, 12);
    let cfg = UserModelConfig::default();
    for seed in 0..5 {
        let u = utility(seed);
        let mut tree = LookaheadTree::new(&d, &TripDesign::empty(), &cfg).unwrap();
        for c in tree.root_changes() {
            let q0 = tree.q_value(c, &u, 0).unwrap();
            let q1 = tree.q_value(c, &u, 1).unwrap();
            let q2 = tree.q_value(c, &u, 2).unwrap();
            assert!(q0 <= q1 && q1 <= q2);
        }
    }
}

#[test]
fn horizon_two_matches_exhaustive_tree() {
    for city_seed in 0..4 {
        let d = small_domain(5, city_seed);
        let cfg = UserModelConfig::default();
        let start = d.apply(&TripDesign::empty(), TripChange::Add(0), Dynamics::Objective).unwrap();
        for state in [TripDesign::empty(), start] {
            for useed in 0..3 {
                let u = utility(useed + 10 * city_seed);
                for c in d.legal_changes(&state).unwrap() {
                    let q = lookahead_value(&d, &state, c, &u, &UserModelParams::deterministic(2), &cfg).unwrap();
                    let after = d.apply(&state, c, Dynamics::Subjective).unwrap();
                    assert!((q - exhaustive_value(&d, &after, &u, 2)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn narrow_beam_is_a_lower_bound() {
    let d = small_domain(9, 2);
    let u = utility(4);
    let narrow = UserModelConfig { beam_width: 1, horizon_max: 2 };
    for c in d.legal_changes(&TripDesign::empty()).unwrap() {
        let q = lookahead_value(&d, &TripDesign::empty(), c, &u, &UserModelParams::deterministic(2), &narrow).unwrap();
        let after = d.apply(&TripDesign::empty(), c, Dynamics::Subjective).unwrap();
        assert!(q <= exhaustive_value(&d, &after, &u, 2) + 1e-12);
    }
}

#[test]
fn illegal_lookahead_change_is_an_error() {
    let d = small_domain(5, 1);
    let r = lookahead_value(
        &d,
        &TripDesign::empty(),
        TripChange::Remove(0),
        &utility(0),
        &UserModelParams::deterministic(1),
        &UserModelConfig::default(),
    );
    assert!(matches!(r, Err(crate::Error::IllegalChange(_))));
}

#[test]
fn zero_temperature_puts_all_mass_on_argmax() {
    let probs = choice_probabilities(&[0.0, 0.5, 0.9, 0.2], 0, None, &UserModelParams::deterministic(0));
    assert_eq!(probs, vec![0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn equal_values_split_evenly() {
    let p = params(2.0, 1.0, 3.0);
    let probs = choice_probabilities(&[0.0, 1.0, 1.0], 0, None, &p);
    assert_eq!(probs[1], probs[2]);
    let keep = 1.0 / (1.0 + (-3.0f64).exp());
    assert!((probs[1] - 0.5 * keep).abs() < 1e-15);
    assert!((probs[0] - (1.0 - keep)).abs() < 1e-15);
}

#[test]
fn single_option_is_certain() {
    assert_eq!(choice_probabilities(&[0.3], 0, None, &params(1.0, 1.0, 1.0)), vec![1.0]);
    let mut rng = rng_from_seed(0);
    assert_eq!(sample_from_values(&[0.3], 0, None, &params(1.0, 1.0, 1.0), &mut rng), 0);
}

#[test]
fn recommending_noop_is_ignored() {
    let p = params(1.5, 2.0, 0.7);
    let v = [0.1, 0.4, -0.3, 0.2];
    assert_eq!(choice_probabilities(&v, 0, Some(0), &p), choice_probabilities(&v, 0, None, &p));
}

#[test]
fn absent_recommendation_is_select_then_stop() {
    let p = params(1.3, 9.0, 2.1);
    let v = [0.2, 0.5, -0.1, 0.35, 0.0];
    let probs = choice_probabilities(&v, 0, None, &p);
    let z: f64 = v[1..].iter().map(|x| (1.3 * x).exp()).sum();
    let mut noop = 0.0;
    for i in 1..v.len() {
        let select = (1.3 * v[i]).exp() / z;
        let keep = (2.1 * v[i]).exp() / ((2.1 * v[i]).exp() + (2.1 * v[0]).exp());
        assert!((probs[i] - select * keep).abs() < 1e-12);
        noop += select * (1.0 - keep);
    }
    assert!((probs[0] - noop).abs() < 1e-12);
}

#[test]
fn sampler_agrees_with_closed_form() {
    let p = params(2.0, 3.0, 1.5);
    let v = [0.0, 0.6, -0.2, 0.3, 0.1];
    let probs = choice_probabilities(&v, 0, Some(3), &p);
    let n = 100_000;
    let mut counts = [0usize; 5];
    let mut rng = rng_from_seed(42);
    for _ in 0..n {
        counts[sample_from_values(&v, 0, Some(3), &p, &mut rng)] += 1;
    }
    for i in 0..5 {
        let freq = counts[i] as f64 / n as f64;
        let se = (probs[i] * (1.0 - probs[i]) / n as f64).sqrt();
        assert!((freq - probs[i]).abs() <= 3.0 * se + 1e-12, "option {i}: {freq} vs {}", probs[i]);
    }
}

#[test]
fn sampling_is_reproducible() {
    let d = small_domain(10, 4);
    let u = utility(2);
    let p = params(1.0, 1.0, 1.0);
    let cfg = UserModelConfig::default();
    let draw = |seed| {
        let mut rng = rng_from_seed(seed);
        (0..30)
            .map(|_| sample_choice(&d, &TripDesign::empty(), Some(TripChange::Add(3)), &u, &p, &cfg, &mut rng).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
}

#[test]
fn log_likelihood_examples() {
    // nothing fits in the day, so staying put is the only option
    let city = crate::trip::tests::city_from(&[(0.0, 0.0, 0, 13.0, 0.0)], 1);
    let d = TripDomain::new(&city, TripConfig::default()).unwrap();
    let u = TripUtilityParams { cost_weight: 0.5, category_prefs: vec![1.0], walk_penalty: 0.0 };
    let p = params(1.0, 1.0, 1.0);
    let cfg = UserModelConfig::default();
    let obs = ChoiceObservation { state_before: TripDesign::empty(), recommendation: None, chosen: TripChange::NoOp };
    assert_eq!(log_likelihood(&d, &obs, &u, &p, &cfg).unwrap(), 0.0);
    let bad = ChoiceObservation { chosen: TripChange::Add(0), ..obs };
    assert!(matches!(log_likelihood(&d, &bad, &u, &p, &cfg), Err(crate::Error::IllegalChange(_))));

    let d = small_domain(7, 8);
    let u = utility(3);
    let p = UserModelParams { horizon: 1, ..params(3.0, 2.0, 4.0) };
    let rec = Some(TripChange::Add(5));
    let dist = choice_distribution(&d, &TripDesign::empty(), rec, &u, &p, &cfg).unwrap();
    for &c in &dist.changes {
        let obs = ChoiceObservation { state_before: TripDesign::empty(), recommendation: rec, chosen: c };
        let ll = log_likelihood(&d, &obs, &u, &p, &cfg).unwrap();
        assert!(ll <= 0.0 && ll.is_finite());
        assert_eq!(ll, dist.prob(c).ln());
        assert!((ll.exp() - dist.prob(c)).abs() <= 1e-15);
    }
}

fn values_strategy() -> impl Strategy<Value = (Vec<f64>, usize, Option<usize>, UserModelParams)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..2.0, n),
            0..n,
            prop::option::of(0..n),
            (0.01f64..60.0, 0.01f64..60.0, 0.01f64..60.0),
        )
            .prop_map(|(v, noop, rec, (a, b, c))| (v, noop, rec, params(a, b, c)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn probabilities_sum_to_one((v, noop, rec, p) in values_strategy()) {
        let probs = choice_probabilities(&v, noop, rec, &p);
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn shifting_values_changes_nothing((v, noop, rec, p) in values_strategy(), k in -50.0f64..50.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + k).collect();
        let a = choice_probabilities(&v, noop, rec, &p);
        let b = choice_probabilities(&shifted, noop, rec, &p);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_the_recommendation_raises_uptake((v, noop, rec, p) in values_strategy(), bump in 0.0f64..1.0) {
        let r = rec.unwrap_or((noop + 1) % v.len());
        prop_assume!(r != noop);
        let before = choice_probabilities(&v, noop, Some(r), &p)[r];
        let mut raised = v.clone();
        raised[r] += bump;
        let after = choice_probabilities(&raised, noop, Some(r), &p)[r];
        prop_assert!(after >= before - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn trip_choice_distributions_sum_to_one(city in 0u64..1000, useed in 0u64..1000, h in 0u32..=2, rec_pick in 0usize..8) {
        let d = small_domain(8, city);
        let cfg = UserModelConfig::default();
        let p = UserModelPrior::default().sample(&mut rng_from_seed(useed));
        let p = UserModelParams { horizon: h, ..p };
        let legal = d.legal_changes(&TripDesign::empty()).unwrap();
        let rec = legal.get(rec_pick).copied();
        let dist = choice_distribution(&d, &TripDesign::empty(), rec, &utility(useed), &p, &cfg).unwrap();
        prop_assert!((dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(dist.changes, legal);
    }
}
