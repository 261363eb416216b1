use ifr_core::adaptation::*;
use ifr_core::generator::{generate_scene, GeneratorConfig};
use ifr_core::nets::{NetConfig, RelationNets};
use ifr_core::scene::Scene;
use ifr_core::BeliefMatrix;
use ifr_tensor::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scene(seed: u64) -> Scene {
    let cfg = GeneratorConfig { points_per_object: 32, ..GeneratorConfig::default() };
    generate_scene(&cfg, "kitchen", "k", seed).unwrap()
}

fn nets() -> RelationNets {
    RelationNets::new(NetConfig { encoder_points: 32, ..NetConfig::default() }, 3).unwrap()
}

/// The selection rule evaluated directly: scores for every candidate, then the first
/// maximum.
fn brute_force(values: &[f64], n: usize, interacted: &[bool]) -> Option<usize> {
    let scores: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if interacted[i] {
                return None;
            }
            let mut m = f64::NEG_INFINITY;
            for j in 0..n {
                let r = values[i * n + j];
                m = m.max(if r < 1.0 - r { r } else { 1.0 - r });
            }
            Some(m)
        })
        .collect();
    let best = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| *s == Some(best))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn selection_matches_brute_force(
        values in prop::collection::vec(prop_oneof![0.0..=1.0f64, Just(0.5), Just(0.25)], 36),
        interacted in prop::collection::vec(any::<bool>(), 6),
    ) {
        let b = BeliefMatrix::new(6, values.clone()).unwrap();
        match brute_force(&values, 6, &interacted) {
            Some(i) => prop_assert_eq!(select_next(&b, &interacted).unwrap(), i),
            None => prop_assert!(select_next(&b, &interacted).is_err()),
        }
    }

    #[test]
    fn stop_matches_direct_check(values in prop::collection::vec(prop_oneof![0.0..=1.0f64, Just(0.05), Just(0.95), 0.0..0.06f64], 9)) {
        let b = BeliefMatrix::new(3, values.clone()).unwrap();
        let direct = values.iter().all(|&r| r.min(1.0 - r) < 0.05);
        prop_assert_eq!(should_stop(&b, 0.05), direct);
    }
}

#[test]
fn selection_examples() {
    let b = BeliefMatrix::new(3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.45, 1.0]).unwrap();
    assert_eq!(select_next(&b, &[false; 3]).unwrap(), 2);
    let tie = BeliefMatrix::uniform(3, 0.5);
    assert_eq!(select_next(&tie, &[true, false, false]).unwrap(), 1);
}

#[test]
fn full_budget_recovers_ground_truth() {
    let n = nets();
    for seed in 0..3 {
        let s = scene(seed);
        let cfg = AdaptationConfig::new(BudgetMode::Fraction(1.0));
        let out = run_adaptation(&s, &n, &cfg, &Uncertainty, PriorSource::Scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.interactions(), s.n());
        assert_eq!(out.prediction, s.ground_truth.adjacency());
    }
}

#[test]
fn zero_budget_is_the_thresholded_prior() {
    let n = nets();
    let s = scene(4);
    let cfg = AdaptationConfig::new(BudgetMode::Fraction(0.0));
    let out = run_adaptation(&s, &n, &cfg, &Uncertainty, PriorSource::Scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let prior = n.sr_prior(&n.context(&s).unwrap()).unwrap();
    assert_eq!(out.interactions(), 0);
    assert_eq!(out.prediction, prior.threshold(0.9));
    assert_eq!(out.curve.len(), 1);
}

#[test]
fn confident_prior_stops_immediately() {
    let mut n = nets();
    n.sr.set("sr.head.b2", Tensor::new(vec![1, 1], vec![-40.0]).unwrap()).unwrap();
    let w2 = n.sr.get("sr.head.w2").unwrap().shape().to_vec();
    n.sr.set("sr.head.w2", Tensor::zeros(&w2)).unwrap();
    let s = scene(5);
    let cfg = AdaptationConfig::new(BudgetMode::Certainty);
    let out = run_adaptation(&s, &n, &cfg, &Uncertainty, PriorSource::Scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(out.interactions(), 0);
}

#[test]
fn run_contracts_hold_for_every_selector() {
    let n = nets();
    for (k, seed) in [(0.1, 6), (0.2, 7), (0.5, 8)] {
        let s = scene(seed);
        for selector in [&Uncertainty as &dyn Selector, &RandomPick] {
            for prior in [PriorSource::Scene, PriorSource::BinaryOnly, PriorSource::DenseEdges] {
                let cfg = AdaptationConfig::new(BudgetMode::Fraction(k));
                let run = |r: u64| run_adaptation(&s, &n, &cfg, selector, prior, &mut ChaCha8Rng::seed_from_u64(r)).unwrap();
                let out = run(1);
                assert_eq!(out.interactions(), BudgetMode::Fraction(k).interactions(s.n()));
                let mut seen = out.order.clone();
                seen.sort();
                seen.dedup();
                assert_eq!(seen.len(), out.order.len());
                // Observed rows are exact in the final prediction and every
                // later curve point.
                for (t, &i) in out.order.iter().enumerate() {
                    for step in &out.curve[t + 1..] {
                        assert_eq!(&step[i * s.n()..(i + 1) * s.n()], s.ground_truth.row(i));
                    }
                }
                assert_eq!(out.curve.len(), out.order.len() + 1);
                assert_eq!(out, run(1));
            }
        }
    }
}

#[test]
fn certainty_mode_is_bounded_by_object_count() {
    let n = nets();
    let s = scene(9);
    let cfg = AdaptationConfig::new(BudgetMode::Certainty);
    let out = run_adaptation(&s, &n, &cfg, &Uncertainty, PriorSource::Scene, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(out.interactions() <= s.n());
}

#[test]
fn invalid_thresholds_are_rejected() {
    let mut cfg = AdaptationConfig::new(BudgetMode::Certainty);
    cfg.stop_threshold = 0.5;
    assert!(cfg.validate().is_err());
    let mut cfg = AdaptationConfig::new(BudgetMode::Certainty);
    cfg.decision_threshold = 0.5;
    assert!(cfg.validate().is_err());
    assert!(selector_registry().create("greedy").is_err());
}
