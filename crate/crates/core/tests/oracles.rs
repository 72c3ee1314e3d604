mod common;

use bfe_core::adaptive::{lo_candidates, select_lo_frequency, utility, BfeConfig, UtilityEvaluator};
use bfe_core::posterior::{gaussian_prior, uniform_prior, FrequencyInterval, GridDistribution};
use bfe_core::schedule::Scheme;
use common::*;
use bfe_core::montecarlo::trial_rng;
use rand::Rng;

#[test]
fn update_matches_fine_grid_documented_case() {
    let t = 5e-3;
    let interval = FrequencyInterval::centered(0.0, 1.0 / t).unwrap();
    let d = check_update(PriorShape::Uniform, interval, 0.5, 37.0, t);
    assert!(d < 1e-6, "L1 distance {d}");
}

#[test]
fn update_matches_fine_grid_random_instances() {
    for d in update_instance_errors(11, 20) {
        assert!(d < 1e-6, "L1 distance {d}");
    }
}

fn reference_utility(shape: &PriorShape, interval: FrequencyInterval<f64>, f: f64, t: f64) -> f64 {
    reference_score(|x| shape.density(x), interval.lo(), interval.hi(), 4096, f, t, R, 64).information
}

#[test]
fn utility_matches_reference_documented_case() {
    let t = 1e-3;
    let interval = FrequencyInterval::centered(0.0, 1.0 / t).unwrap();
    let prior = uniform_prior(interval, N).unwrap();
    for f in [-400.0, 0.0, 123.0] {
        let u = utility(&prior, f, t, R, 64).unwrap();
        let reference = reference_utility(&PriorShape::Uniform, interval, f, t);
        assert!(((u - reference) / reference).abs() < 0.01, "{u} vs {reference}");
    }
}

#[test]
fn utility_matches_reference_random_instances() {
    for e in utility_instance_errors(12, 20) {
        assert!(e < 0.01, "relative error {e}");
    }
}

#[test]
fn variance_reduction_matches_reference() {
    let mut rng = trial_rng(13, 0);
    for _ in 0..8 {
        let t = rng.random_range(1e-3..2e-2);
        let interval = FrequencyInterval::centered(0.0, 1.0 / t).unwrap();
        let w = interval.width();
        let shape = PriorShape::Gaussian {
            mu: rng.random_range(-0.1..0.1) * w,
            sigma: w * rng.random_range(0.02..0.4),
        };
        let f = rng.random_range(-0.5..0.5) * w;
        let evaluator = UtilityEvaluator::new(&shape.grid(interval), t, R, 64).unwrap();
        let score = evaluator.score(f);
        let reference = reference_score(|x| shape.density(x), interval.lo(), interval.hi(), 4096, f, t, R, 64);
        let rel = (score.variance_reduction - reference.variance_reduction).abs() / evaluator.prior_variance();
        assert!(rel < 1e-3, "{} vs {}", score.variance_reduction, reference.variance_reduction);
    }
}

#[test]
fn selection_matches_dense_scan() {
    for (instance, c) in selection_instance_checks(14, 20).iter().enumerate() {
        assert!(c.rule_consistent, "instance {instance}: dense scan disagrees with the reference rule");
        assert!(c.distance <= c.spacing * (1.0 + 1e-9), "instance {instance}: {c:?}");
    }
}

#[test]
fn delta_prior_selects_lowest_candidate() {
    let interval = FrequencyInterval::new(0.0, 100.0).unwrap();
    let mut w = vec![0.0; N];
    w[700] = 1.0;
    let prior = GridDistribution::from_weights(interval, w).unwrap();
    let scheme = Scheme::new(1.25, 1, 2, 3, 0.01).unwrap();
    let config = BfeConfig::new(scheme, R, interval).unwrap();
    assert_eq!(select_lo_frequency(&prior, 0.01, R, &config).unwrap(), 0.0);
}

#[test]
fn symmetric_prior_selection_is_near_argmax() {
    let t = 4e-3;
    let interval = FrequencyInterval::centered(50.0, 1.0 / t).unwrap();
    let prior = gaussian_prior(50.0, 20.0, interval, N).unwrap();
    let scheme = Scheme::new(1.25, 1, 2, 3, t).unwrap();
    let config = BfeConfig::new(scheme, R, interval).unwrap();
    let chosen = select_lo_frequency(&prior, t, R, &config).unwrap();
    let evaluator = UtilityEvaluator::new(&prior, t, R, 64).unwrap();
    let chosen_u = evaluator.utility(chosen);
    let max = lo_candidates(&interval, 128)
        .iter()
        .map(|f| evaluator.utility(*f))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(chosen_u >= max * (1.0 - bfe_core::adaptive::NEAR_TIE));
}
