//! Monte Carlo ensembles of simulated estimation runs.
//!
//! Trial `k` of master seed `s` draws from ChaCha8 stream `k` keyed by `s`, so
//! any trial can be reproduced alone and results do not depend on how the
//! trials are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{bfe_run, BfeConfig, EstimationTrace};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{simulate_measurement, SignalModel};

pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Where the true transition sits relative to the initial interval centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TruthPlacement<T> {
    Offset(T),
    /// Uniform within `±half_width` of the centre.
    Uniform { half_width: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<T> {
    pub truths: Vec<T>,
    pub traces: Vec<EstimationTrace<T>>,
}

impl<T: Real> Ensemble<T> {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Estimation errors `f_est^(j) − f_c` at iteration index `j` (0-based).
    pub fn errors_at(&self, j: usize) -> Vec<T> {
        self.traces
            .iter()
            .zip(&self.truths)
            .map(|(t, f_c)| t.records[j].f_est - *f_c)
            .collect()
    }

    /// Sample standard deviation of the error after each iteration.
    pub fn std_by_iteration(&self) -> Vec<T> {
        let iterations = self.traces.first().map_or(0, |t| t.records.len());
        (0..iterations).map(|j| sample_std(&self.errors_at(j))).collect()
    }

    pub fn cumulative_times(&self) -> Vec<T> {
        self.traces
            .first()
            .map(|t| t.records.iter().map(|r| r.cumulative_time).collect())
            .unwrap_or_default()
    }
}

/// Bessel-corrected standard deviation; zero for fewer than two values.
pub fn sample_std<T: Real>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let ss = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>();
    (ss / (n - T::one())).sqrt()
}

/// One simulated trial: the truth is placed, then `bfe_run` is driven by the
/// Gaussian measurement simulator, all from the trial's own stream.
pub fn run_trial<T: Real>(
    config: &BfeConfig<T>,
    model: &SignalModel<T>,
    truth: TruthPlacement<T>,
    master_seed: u64,
    trial: u64,
) -> Result<(T, EstimationTrace<T>)> {
    let mut rng = trial_rng(master_seed, trial);
    let center = config.initial_interval.center();
    let f_c = match truth {
        TruthPlacement::Offset(d) => center + d,
        TruthPlacement::Uniform { half_width } => {
            let hw = half_width.as_f64().abs();
            let u = if hw > 0.0 {
                Uniform::new_inclusive(-hw, hw)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            center + T::lit(u)
        }
    };
    let mut config = config.clone();
    config.seed = rng.next_u64();
    let mut model = model.clone();
    model.f_c_true = f_c;
    let trace = bfe_run(&config, |f, t| simulate_measurement(&model, f, t, &mut rng))?;
    Ok((f_c, trace))
}

/// Runs `trials` independent trials in parallel; output order is by trial id.
pub fn run_ensemble<T: Real>(
    config: &BfeConfig<T>,
    model: &SignalModel<T>,
    truth: TruthPlacement<T>,
    trials: u64,
    master_seed: u64,
) -> Result<Ensemble<T>> {
    let results: Vec<(T, EstimationTrace<T>)> = (0..trials)
        .into_par_iter()
        .map(|k| run_trial(config, model, truth, master_seed, k))
        .collect::<Result<_>>()?;
    let (truths, traces) = results.into_iter().unzip();
    Ok(Ensemble { truths, traces })
}
