use bfe_core::adaptive::{random_enhancement, utility};
use bfe_core::analysis::{allan_deviation, improvement_db, octave_taus, FractionalSeries};
use bfe_core::montecarlo::trial_rng;
use bfe_core::posterior::{bayes_update, gaussian_prior, regrid, uniform_prior, FrequencyInterval};
use bfe_core::schedule::{build_schedule, total_time, Scheme};
use bfe_core::signal::{ramsey_signal, single_particle_likelihood};
use bfe_core::{GridF32, IntervalF32};
use proptest::prelude::*;
use rand::Rng;

fn l1(a: &[f64], b: &[f64], h: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * h
}

proptest! {
    #[test]
    fn fringe_bounded_and_periodic(f in -1e4f64..1e4, fc in -1e4f64..1e4, fs in -10f64..10.0, t in 1e-4f64..0.05) {
        let s = ramsey_signal(f, fc, fs, t);
        prop_assert!((0.0..=1.0).contains(&s));
        let shifted = ramsey_signal(f + 1.0 / t, fc, fs, t);
        prop_assert!((s - shifted).abs() < 1e-6);
    }

    #[test]
    fn outcome_probabilities_sum_to_one(f in -100f64..100.0, fc in -100f64..100.0, t in 1e-4f64..0.05) {
        let l0 = single_particle_likelihood(0, fc, f, 0.0, t).unwrap();
        let l1 = single_particle_likelihood(1, fc, f, 0.0, t).unwrap();
        prop_assert!((l0 + l1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn update_stays_normalized(mu in -0.4f64..0.4, sigma in 0.01f64..2.0, a in 0.1f64..5.0, b in 0.0f64..3.0) {
        let iv = FrequencyInterval::new(-1.0, 1.0).unwrap();
        let prior = gaussian_prior(mu, sigma, iv, 512).unwrap();
        let post = bayes_update(&prior, |f| (a * f).cos() + b + 1.0).unwrap();
        prop_assert!((post.integral() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_likelihood_is_identity(mu in -0.4f64..0.4, sigma in 0.01f64..2.0, c in 1e-6f64..1e6) {
        let iv = FrequencyInterval::new(-1.0, 1.0).unwrap();
        let prior = gaussian_prior(mu, sigma, iv, 256).unwrap();
        let post = bayes_update(&prior, |_| c).unwrap();
        prop_assert!(l1(prior.weights(), post.weights(), prior.spacing()) < 1e-12);
    }

    #[test]
    fn sequential_updates_commute(k1 in 0.5f64..8.0, k2 in 0.5f64..8.0, p1 in 0.0f64..6.0, p2 in 0.0f64..6.0) {
        let iv = FrequencyInterval::new(0.0, 1.0).unwrap();
        let prior = uniform_prior(iv, 400).unwrap();
        let l_a = |f: f64| 1.1 + (k1 * f + p1).sin();
        let l_b = |f: f64| 1.1 + (k2 * f + p2).cos();
        let two_step = bayes_update(&bayes_update(&prior, l_a).unwrap(), l_b).unwrap();
        let one_step = bayes_update(&prior, |f| l_a(f) * l_b(f)).unwrap();
        prop_assert!(l1(two_step.weights(), one_step.weights(), prior.spacing()) < 1e-9);
    }

    #[test]
    fn entropy_below_uniform_bound(mu in 0.0f64..3.0, sigma in 0.001f64..10.0) {
        let iv = FrequencyInterval::new(0.0, 3.0).unwrap();
        let d = gaussian_prior(mu, sigma, iv, 1024).unwrap();
        prop_assert!(d.entropy() <= 3f64.ln() + 1e-6);
        prop_assert!(d.std() >= 0.0);
    }

    #[test]
    fn regrid_onto_same_grid_is_identity(mu in -0.5f64..0.5, sigma in 0.05f64..1.0) {
        let iv = FrequencyInterval::new(-1.0, 1.0).unwrap();
        let d = gaussian_prior(mu, sigma, iv, 300).unwrap();
        let r = regrid(&d, iv, 300).unwrap();
        prop_assert!(l1(d.weights(), r.weights(), d.spacing()) < 1e-12);
    }

    #[test]
    fn schedule_monotone_ending_at_t_max(
        a in 1.05f64..2.0,
        g in 1u32..4,
        plateau in 0u32..10,
        extra in 1u32..30,
        t_max in 1e-3f64..0.1,
    ) {
        let scheme = Scheme::new(a, g, plateau, plateau + extra, t_max).unwrap();
        let s = build_schedule(&scheme);
        prop_assert_eq!(s.len(), (plateau + extra) as usize);
        prop_assert!(s.times.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((s.times[s.len() - 1] - t_max).abs() <= 1e-12 * t_max);
    }

    #[test]
    fn geometric_ratio_exact(a in 1.05f64..3.0, m in 2u32..40, t_max in 1e-3f64..0.1) {
        let s = build_schedule(&Scheme::new(a, 1, 0, m, t_max).unwrap());
        for w in s.times.windows(2) {
            prop_assert!((w[1] / w[0] - a).abs() < 1e-12 * a);
        }
        let limit = t_max * a / (a - 1.0);
        prop_assert!(total_time(&s) <= limit * (1.0 + 1e-12));
    }

    #[test]
    fn enhancement_reproducible(f in -1e3f64..1e3, df in 0.0f64..10.0, seed in any::<u64>()) {
        let a = random_enhancement(f, df, &mut trial_rng(seed, 0));
        let b = random_enhancement(f, df, &mut trial_rng(seed, 0));
        prop_assert_eq!(a, b);
        if df == 0.0 {
            prop_assert_eq!(a, f);
        }
    }

    #[test]
    fn adev_scales_linearly(scale in 1e-3f64..1e3, seed in any::<u64>()) {
        let mut rng = trial_rng(seed, 0);
        let y: Vec<f64> = (0..256).map(|_| rng.random::<f64>() - 0.5).collect();
        let base = FractionalSeries::new(y.clone(), 1.0).unwrap();
        let scaled = FractionalSeries::new(y.iter().map(|v| v * scale).collect(), 1.0).unwrap();
        let taus = octave_taus(&base);
        for (p, q) in allan_deviation(&base, &taus).into_iter().zip(allan_deviation(&scaled, &taus)) {
            let (p, q) = (p.unwrap(), q.unwrap());
            prop_assert!((q.adev - scale * p.adev).abs() <= 1e-12 * scale * p.adev.max(1e-300));
        }
    }

    #[test]
    fn improvement_db_antisymmetric(a in 1e-15f64..1e-9, b in 1e-15f64..1e-9) {
        let ab = improvement_db(a, b).unwrap();
        let ba = improvement_db(b, a).unwrap();
        prop_assert!((ab + ba).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn utility_non_negative(mu in -0.3f64..0.3, sigma in 0.003f64..0.5, f in -0.5f64..0.5, t in 1e-3f64..0.02) {
        let width = 1.0 / t;
        let iv = FrequencyInterval::centered(0.0, width).unwrap();
        let prior = gaussian_prior(mu * width, sigma * width, iv, 512).unwrap();
        let u = utility(&prior, f * width, t, 1540.0, 32).unwrap();
        prop_assert!(u >= -1e-9);
    }
}

#[test]
fn single_precision_grid() {
    let iv = IntervalF32::new(-50.0, 50.0).unwrap();
    let prior: GridF32 = uniform_prior(iv, 256).unwrap();
    let post = bayes_update(&prior, |f| 1.0 + 0.5 * (f / 10.0).cos()).unwrap();
    assert!((post.integral() - 1.0).abs() < 1e-5);
    let u = utility(&post, 3.0f32, 0.01, 1540.0, 32).unwrap();
    assert!(u.is_finite() && u >= -1e-5);
}
