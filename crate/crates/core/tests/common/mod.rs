//! Brute-force reference computations, written without the crate's fast
//! paths: dense grids, explicit hypothetical posteriors, plain loops.
#![allow(dead_code)]

use std::f64::consts::PI;

use bfe_core::adaptive::{lo_candidates, select_best, select_lo_frequency, BfeConfig, Score, UtilityEvaluator};
use bfe_core::montecarlo::trial_rng;
use bfe_core::posterior::{bayes_update, gaussian_prior, uniform_prior, FrequencyInterval, GridDistribution};
use bfe_core::schedule::Scheme;
use bfe_core::signal::gaussian_likelihood;
use rand::Rng;

pub const OUTCOME_FLOOR: f64 = bfe_core::adaptive::OUTCOME_WIDTH_FLOOR;

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + h * k as f64 }).collect()
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|k| if k == 0 || k == n - 1 { h / 2.0 } else { h }).collect()
}

pub fn fringe(f: f64, fc: f64, t: f64) -> f64 {
    0.5 * (1.0 + (2.0 * PI * (f - fc) * t).cos())
}

/// Gaussian density of an observed `p_e`, variance from `p_e` clamped to `[1/2R, 1−1/2R]`.
pub fn observed_likelihood(p_e: f64, fc: f64, f: f64, t: f64, r: f64) -> f64 {
    let eps = 1.0 / (2.0 * r);
    let p = p_e.clamp(eps, 1.0 - eps);
    let var = p * (1.0 - p) / r;
    let d = p_e - fringe(f, fc, t);
    (-(d * d) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Product-and-normalize on an arbitrary grid; returns normalized densities.
pub fn product_normalize(nodes: &[f64], prior: &[f64], like: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = nodes[1] - nodes[0];
    let w = trapezoid_weights(nodes.len(), h);
    let raw: Vec<f64> = nodes.iter().zip(prior).map(|(f, p)| like(*f) * p).collect();
    let z: f64 = raw.iter().zip(&w).map(|(v, w)| v * w).sum();
    raw.iter().map(|v| v / z).collect()
}

pub struct ReferenceScore {
    pub information: f64,
    pub variance_reduction: f64,
}

/// Expected information gain and variance reduction of measuring at `f`,
/// with the prior density sampled on `n` nodes of `[lo, hi]`.
///
/// Outcome model: `p_e` on `q` trapezoid nodes over `[ε, 1−ε]`; for each
/// `f_c` the outcome density is `N(p_e; s, max(σ(s), floor·h))` normalized
/// over those nodes. Each hypothetical posterior is formed explicitly.
pub fn reference_score(
    density: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
    f: f64,
    t: f64,
    r: f64,
    q: usize,
) -> ReferenceScore {
    let nodes = linspace(lo, hi, n);
    let wf = trapezoid_weights(n, (hi - lo) / (n - 1) as f64);
    let raw: Vec<f64> = nodes.iter().map(|x| density(*x)).collect();
    let z: f64 = raw.iter().zip(&wf).map(|(p, w)| p * w).sum();
    let prior: Vec<f64> = raw.iter().map(|p| p / z).collect();
    let entropy = |p: &[f64]| -> f64 {
        -p.iter()
            .zip(&wf)
            .map(|(p, w)| if *p > 0.0 { w * p * p.ln() } else { 0.0 })
            .sum::<f64>()
    };
    let moments = |p: &[f64]| -> (f64, f64) {
        let m: f64 = p.iter().zip(&wf).zip(&nodes).map(|((p, w), x)| w * p * x).sum();
        let v: f64 = p.iter().zip(&wf).zip(&nodes).map(|((p, w), x)| w * p * (x - m) * (x - m)).sum();
        (m, v)
    };
    let h_prior = entropy(&prior);
    let (_, var_prior) = moments(&prior);

    let eps = 1.0 / (2.0 * r);
    let pe = linspace(eps, 1.0 - eps, q);
    let h = pe[1] - pe[0];
    let wq = trapezoid_weights(q, h);
    // outcome[k][j]: density of p_e node j given f_c node k
    let outcome: Vec<Vec<f64>> = nodes
        .iter()
        .map(|fc| {
            let s = fringe(f, *fc, t);
            let sc = s.clamp(eps, 1.0 - eps);
            let sigma = (sc * (1.0 - sc) / r).sqrt().max(OUTCOME_FLOOR * h);
            let col: Vec<f64> = pe.iter().map(|p| (-(p - s) * (p - s) / (2.0 * sigma * sigma)).exp()).collect();
            let mass: f64 = col.iter().zip(&wq).map(|(l, v)| l * v).sum();
            col.iter().map(|l| l / mass).collect()
        })
        .collect();

    let mut information = 0.0;
    let mut expected_var = 0.0;
    let mut evidence_total = 0.0;
    for j in 0..q {
        let post_raw: Vec<f64> = (0..n).map(|k| outcome[k][j] * prior[k]).collect();
        let evidence: f64 = post_raw.iter().zip(&wf).map(|(v, w)| v * w).sum();
        if evidence <= 1e-300 {
            continue;
        }
        let post: Vec<f64> = post_raw.iter().map(|v| v / evidence).collect();
        information += wq[j] * evidence * (h_prior - entropy(&post));
        expected_var += wq[j] * evidence * moments(&post).1;
        evidence_total += wq[j] * evidence;
    }
    ReferenceScore {
        information,
        variance_reduction: var_prior * evidence_total - expected_var,
    }
}

/// Index chosen by the documented rule: information within the near-tie
/// margin of the best, then largest variance reduction, then lowest index.
pub fn reference_choice(scores: &[ReferenceScore], prior_variance: f64) -> usize {
    let best = scores.iter().map(|s| s.information).fold(f64::NEG_INFINITY, f64::max);
    let tol = bfe_core::adaptive::NEAR_TIE * best.abs() + 1e-12;
    let near: Vec<usize> = (0..scores.len()).filter(|i| scores[*i].information >= best - tol).collect();
    let top = near.iter().map(|i| scores[*i].variance_reduction).fold(f64::NEG_INFINITY, f64::max);
    // variance reductions equal to rounding count as tied, lowest index wins
    let vr_tol = 1e-10 * top.abs().max(prior_variance);
    near.into_iter()
        .find(|i| scores[*i].variance_reduction >= top - vr_tol)
        .unwrap_or(0)
}

/// Overlapping Allan deviation straight from the definition on fractional
/// frequency averages.
pub fn allan_by_definition(y: &[f64], m: usize) -> f64 {
    let n = y.len();
    let avg = |start: usize| y[start..start + m].iter().sum::<f64>() / m as f64;
    let count = n + 1 - 2 * m;
    let sum: f64 = (0..count)
        .map(|i| {
            let d = avg(i + m) - avg(i);
            d * d
        })
        .sum();
    (sum / (2.0 * count as f64)).sqrt()
}

/// Ordinary least squares slope and intercept.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub const R: f64 = 1540.0;
pub const N: usize = 2048;
/// Fine grid whose every 512th node is a node of the 2048 grid.
pub const FINE: usize = 2047 * 512 + 1;

pub enum PriorShape {
    Uniform,
    Gaussian { mu: f64, sigma: f64 },
}

impl PriorShape {
    pub fn density(&self, f: f64) -> f64 {
        match self {
            PriorShape::Uniform => 1.0,
            PriorShape::Gaussian { mu, sigma } => (-(f - mu) * (f - mu) / (2.0 * sigma * sigma)).exp(),
        }
    }

    pub fn grid(&self, interval: FrequencyInterval<f64>) -> GridDistribution<f64> {
        match self {
            PriorShape::Uniform => uniform_prior(interval, N).unwrap(),
            PriorShape::Gaussian { mu, sigma } => gaussian_prior(*mu, *sigma, interval, N).unwrap(),
        }
    }
}

pub fn l1_on_coarse_nodes(coarse: &GridDistribution<f64>, fine: &[f64]) -> f64 {
    let w = trapezoid_weights(N, coarse.spacing());
    coarse
        .weights()
        .iter()
        .enumerate()
        .map(|(k, p)| w[k] * (p - fine[512 * k]).abs())
        .sum()
}

pub fn check_update(shape: PriorShape, interval: FrequencyInterval<f64>, p_e: f64, f: f64, t: f64) -> f64 {
    let prior = shape.grid(interval);
    let post = bayes_update(&prior, |fc| gaussian_likelihood(p_e, fc, f, 0.0, t, R).unwrap()).unwrap();
    let nodes = linspace(interval.lo(), interval.hi(), FINE);
    let fine_prior: Vec<f64> = nodes.iter().map(|x| shape.density(*x)).collect();
    let fine = product_normalize(&nodes, &fine_prior, |fc| observed_likelihood(p_e, fc, f, t, R));
    l1_on_coarse_nodes(&post, &fine)
}

pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// L1 distances between `bayes_update` and the fine-grid oracle on random
/// priors, observations and Ramsey times.
pub fn update_instance_errors(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, 0);
    (0..count)
        .map(|_| {
            let t = rng.random_range(1e-3..2e-2);
            let periods = rng.random_range(1..=3) as f64;
            let center = rng.random_range(-500.0..500.0);
            let interval = FrequencyInterval::centered(center, periods / t).unwrap();
            let w = interval.width();
            let shape = if rng.random_bool(0.3) {
                PriorShape::Uniform
            } else {
                PriorShape::Gaussian {
                    mu: center + rng.random_range(-0.1..0.1) * w,
                    sigma: w * rng.random_range(0.02..0.08),
                }
            };
            let p_e = rng.random_range(0.02..0.98);
            let f = interval.lo() + rng.random_range(0.0..1.0) * w;
            check_update(shape, interval, p_e, f, t)
        })
        .collect()
}

/// Relative errors of `utility` against the 4096-node reference.
pub fn utility_instance_errors(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, 0);
    (0..count)
        .map(|_| {
            let t = rng.random_range(5e-4..2e-2);
            let center = rng.random_range(-100.0..100.0);
            let interval = FrequencyInterval::centered(center, 1.0 / t).unwrap();
            let w = interval.width();
            let shape = if rng.random_bool(0.25) {
                PriorShape::Uniform
            } else {
                PriorShape::Gaussian {
                    mu: center + rng.random_range(-0.2..0.2) * w,
                    sigma: w * rng.random_range(0.005..0.4),
                }
            };
            let f = interval.lo() + rng.random_range(0.0..1.0) * w;
            let u = bfe_core::adaptive::utility(&shape.grid(interval), f, t, R, 64).unwrap();
            let reference =
                reference_score(|x| shape.density(x), interval.lo(), interval.hi(), 4096, f, t, R, 64).information;
            ((u - reference) / reference).abs()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionCheck {
    /// Circular distance between the chosen frequency and the dense-scan optimum.
    pub distance: f64,
    /// Spacing of the production candidate grid.
    pub spacing: f64,
    /// The dense scan's optimum is the one the reference rule picks.
    pub rule_consistent: bool,
}

/// `select_lo_frequency` against a 10x denser candidate scan; the first half
/// of the instances use uniform priors.
pub fn selection_instance_checks(seed: u64, count: usize) -> Vec<SelectionCheck> {
    let mut rng = trial_rng(seed, 0);
    (0..count)
        .map(|instance| {
            let t = rng.random_range(1e-3..2e-2);
            let center = rng.random_range(-100.0..100.0);
            let interval = FrequencyInterval::centered(center, 1.0 / t).unwrap();
            let w = interval.width();
            let shape = if instance < count / 2 {
                PriorShape::Uniform
            } else {
                PriorShape::Gaussian {
                    mu: center + rng.random_range(-0.1..0.1) * w,
                    sigma: w * rng.random_range(0.01..0.3),
                }
            };
            let prior = shape.grid(interval);
            let scheme = Scheme::new(1.25, 1, 2, 3, t).unwrap();
            let config = BfeConfig::new(scheme, R, interval).unwrap();
            let chosen = select_lo_frequency(&prior, t, R, &config).unwrap();

            let evaluator = UtilityEvaluator::new(&prior, t, R, 64).unwrap();
            let dense = lo_candidates(&interval, 1280);
            let scores: Vec<Score<f64>> = dense.iter().map(|f| evaluator.score(*f)).collect();
            let best = dense[select_best(&scores, evaluator.prior_variance())];
            let reference_scores: Vec<ReferenceScore> = scores
                .iter()
                .map(|s| ReferenceScore {
                    information: s.information,
                    variance_reduction: s.variance_reduction,
                })
                .collect();
            SelectionCheck {
                distance: circular_distance(chosen, best, w),
                spacing: w / 128.0,
                rule_consistent: best == dense[reference_choice(&reference_scores, evaluator.prior_variance())],
            }
        })
        .collect()
}
