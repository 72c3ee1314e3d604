//! Closed-loop locking of a noisy local oscillator, either with a PID servo on
//! the two half-maximum points of the fringe or with one full BFE run per
//! feedback cycle.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adaptive::{bfe_run, BfeConfig};
use crate::analysis::FractionalSeries;
use crate::error::{Error, Result};
use crate::posterior::FrequencyInterval;
use crate::scalar::Real;
use crate::schedule::{build_schedule, total_time};
use crate::signal::{simulate_measurement, SignalModel};

/// Per-measurement dead time of the cold-atom sequence: 105 ms loading and
/// cooling plus state preparation and detection pulses.
pub const COLD_ATOM_DEAD_TIME_S: f64 = 0.10545;

/// Free-running LO with white frequency noise and linear drift.
///
/// `offset` carries drift and applied corrections; the white-FM part is a
/// fresh sample for every evolution interval, so the mean frequency over
/// consecutive intervals is uncorrelated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoModel<T> {
    /// Deterministic detuning from the clock transition (Hz).
    pub offset: T,
    /// Fractional Allan deviation at 1 s.
    pub white_fm_sigma: T,
    /// Hz/s.
    pub drift_rate: T,
    /// Hz; converts between absolute and fractional frequency.
    pub nominal_frequency: T,
    /// Mean white-FM excursion over the current interval (Hz).
    pub white_fm_sample: T,
}

impl<T: Real> LoModel<T> {
    pub fn new(offset: T, white_fm_sigma: T, drift_rate: T, nominal_frequency: T) -> Result<Self> {
        Self {
            offset,
            white_fm_sigma,
            drift_rate,
            nominal_frequency,
            white_fm_sample: T::zero(),
        }
        .validated()
    }

    /// Noise-free LO sitting `offset` Hz from resonance.
    pub fn quiet(offset: T, nominal_frequency: T) -> Result<Self> {
        Self::new(offset, T::zero(), T::zero(), nominal_frequency)
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.white_fm_sigma >= T::zero()) {
            return Err(Error::Config(format!("white_fm_sigma must be >= 0, got {}", self.white_fm_sigma)));
        }
        if !(self.nominal_frequency > T::zero()) {
            return Err(Error::Config(format!(
                "nominal_frequency must be positive, got {}",
                self.nominal_frequency
            )));
        }
        if !self.offset.is_finite() || !self.drift_rate.is_finite() {
            return Err(Error::Config("LO offset and drift must be finite".into()));
        }
        Ok(self)
    }

    /// Mean detuning from the clock transition over the current interval.
    pub fn detuning(&self) -> T {
        self.offset + self.white_fm_sample
    }

    pub fn apply_correction(&mut self, correction: T) {
        self.offset = self.offset + correction;
    }
}

/// Advances the LO by `dt`: adds the drift and draws the white-FM mean for the
/// interval, with standard deviation `ν₀·σ_y(1 s)/√dt`.
pub fn lo_evolve<T: Real, R: Rng + ?Sized>(lo: &LoModel<T>, dt: T, rng: &mut R) -> LoModel<T> {
    let mut next = lo.clone();
    next.offset = lo.offset + lo.drift_rate * dt;
    next.white_fm_sample = if lo.white_fm_sigma > T::zero() {
        let z: f64 = StandardNormal.sample(rng);
        lo.nominal_frequency * lo.white_fm_sigma / dt.sqrt() * T::lit(z)
    } else {
        T::zero()
    };
    next
}

/// Frequency error from the two half-maximum probes, `(s₊ − s₋)/(4 T_R P)`.
pub fn pid_error<T: Real>(s_plus: T, s_minus: T, t_r: T, amplitude: T) -> T {
    (s_plus - s_minus) / (T::lit(4.0) * t_r * amplitude)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains<T> {
    pub k_p: T,
    pub k_i: T,
    pub k_d: T,
}

impl<T: Real> Default for PidGains<T> {
    fn default() -> Self {
        Self {
            k_p: T::lit(0.5),
            k_i: T::lit(0.1),
            k_d: T::zero(),
        }
    }
}

impl<T: Real> PidGains<T> {
    pub fn open_loop() -> Self {
        Self {
            k_p: T::zero(),
            k_i: T::zero(),
            k_d: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockMethod {
    Pid,
    Bfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockCycle<T> {
    /// 1-based cycle number.
    pub cycle: u32,
    /// End of the cycle (s).
    pub time: T,
    /// Frequency fluctuation of the locked output (Hz).
    pub delta_nu: T,
    /// Correction applied to the LO at the end of the cycle (Hz).
    pub correction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockTrace<T> {
    pub method: LockMethod,
    pub cycle_duration: T,
    pub nominal_frequency: T,
    pub cycles: Vec<LockCycle<T>>,
}

impl<T: Real> LockTrace<T> {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn delta_nu(&self) -> Vec<T> {
        self.cycles.iter().map(|c| c.delta_nu).collect()
    }

    /// `δν_j / ν₀` sampled every cycle.
    pub fn fractional_series(&self) -> Result<FractionalSeries<T>> {
        let samples = self.cycles.iter().map(|c| c.delta_nu / self.nominal_frequency).collect();
        FractionalSeries::new(samples, self.cycle_duration)
    }
}

/// Conventional lock: each cycle probes `f ± 1/(4T_R)`, forms the error
/// signal with the fringe contrast as `P`, and steps the LO by the PID output.
/// `δν_j` is the LO detuning while cycle `j` was measured.
#[allow(clippy::too_many_arguments)]
pub fn run_pid_lock<T: Real, R: Rng + ?Sized>(
    lo: &LoModel<T>,
    model: &SignalModel<T>,
    t_r: T,
    gains: PidGains<T>,
    cycles: u32,
    dead_time_per_measurement: T,
    rng: &mut R,
) -> Result<LockTrace<T>> {
    if !(t_r > T::zero()) {
        return Err(Error::Precondition(format!("T_R must be positive, got {t_r}")));
    }
    if !(dead_time_per_measurement >= T::zero()) {
        return Err(Error::Precondition("dead time must be non-negative".into()));
    }
    let mut lo = lo.clone().validated()?;
    let cycle_duration = T::lit(2.0) * (t_r + dead_time_per_measurement);
    let quarter = T::one() / (T::lit(4.0) * t_r);
    let mut integral = T::zero();
    let mut previous = T::zero();
    let mut out = Vec::with_capacity(cycles as usize);

    for j in 1..=cycles {
        lo = lo_evolve(&lo, cycle_duration, rng);
        let delta = lo.detuning();
        let f = model.f_c_true + delta;
        let s_plus = simulate_measurement(model, f + quarter, t_r, rng);
        let s_minus = simulate_measurement(model, f - quarter, t_r, rng);
        let e = pid_error(s_plus, s_minus, t_r, model.contrast);
        integral = integral + e;
        let derivative = if j == 1 { T::zero() } else { e - previous };
        previous = e;
        let correction = gains.k_p * e + gains.k_i * integral + gains.k_d * derivative;
        lo.apply_correction(correction);
        out.push(LockCycle {
            cycle: j,
            time: cycle_duration * T::from_usize_lossy(j as usize),
            delta_nu: delta,
            correction,
        });
    }

    Ok(LockTrace {
        method: LockMethod::Pid,
        cycle_duration,
        nominal_frequency: lo.nominal_frequency,
        cycles: out,
    })
}

/// BFE lock: each cycle runs the whole estimation sequence in the LO frame
/// with no intermediate feedback, then moves the LO by the estimate.
/// `δν_j = f_est^j − f_c` is the residual error of the corrected output.
///
/// `config.initial_interval` is interpreted relative to the LO; its `seed` is
/// replaced by a fresh draw from `rng` every cycle.
pub fn run_bfe_lock<T: Real, R: Rng + ?Sized>(
    lo: &LoModel<T>,
    model: &SignalModel<T>,
    config: &BfeConfig<T>,
    cycles: u32,
    dead_time_per_measurement: T,
    rng: &mut R,
) -> Result<LockTrace<T>> {
    if !(dead_time_per_measurement >= T::zero()) {
        return Err(Error::Precondition("dead time must be non-negative".into()));
    }
    let mut config = config.clone().validated()?;
    let mut lo = lo.clone().validated()?;
    let schedule = build_schedule(&config.scheme);
    let cycle_duration = total_time(&schedule) + dead_time_per_measurement * T::from_usize_lossy(schedule.len());
    let mut out = Vec::with_capacity(cycles as usize);

    for j in 1..=cycles {
        lo = lo_evolve(&lo, cycle_duration, rng);
        let delta = lo.detuning();
        config.seed = rng.next_u64();
        let trace = bfe_run(&config, |x, t| simulate_measurement(model, model.f_c_true + delta + x, t, rng))?;
        // The estimate is the transition in LO-relative coordinates, i.e. −δ.
        let correction = trace.f_est;
        lo.apply_correction(correction);
        out.push(LockCycle {
            cycle: j,
            time: cycle_duration * T::from_usize_lossy(j as usize),
            delta_nu: delta + correction,
            correction,
        });
    }

    Ok(LockTrace {
        method: LockMethod::Bfe,
        cycle_duration,
        nominal_frequency: lo.nominal_frequency,
        cycles: out,
    })
}

/// BFE config for locking: interval of width `1/T_1` centred on the LO.
pub fn lock_config<T: Real>(scheme: crate::schedule::Scheme<T>, r: T) -> Result<BfeConfig<T>> {
    let t1 = build_schedule(&scheme).t_first();
    BfeConfig::new(scheme, r, FrequencyInterval::centered(T::zero(), T::one() / t1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Scheme;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quiet_lo_unchanged() {
        let lo = LoModel::quiet(1.5, 6.834e9).unwrap();
        let next = lo_evolve(&lo, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(next.detuning(), 1.5);
    }

    #[test]
    fn drift_accumulates() {
        let lo = LoModel::new(0.0, 0.0, 0.1, 6.834e9).unwrap();
        let next = lo_evolve(&lo, 1.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_relative_eq!(next.offset, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn lo_rejects_bad_parameters() {
        assert!(LoModel::new(0.0, -1e-12, 0.0, 1e9).is_err());
        assert!(LoModel::new(0.0, 1e-12, 0.0, 0.0).is_err());
    }

    #[test]
    fn pid_error_arithmetic() {
        assert_eq!(pid_error(0.3, 0.3, 0.02, 0.5), 0.0);
        assert_relative_eq!(pid_error(0.51, 0.5, 0.02, 0.5), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pid_error_linear_near_resonance() {
        let t = 0.02;
        let model = SignalModel::new(0.0, 1540.0).unwrap();
        let q = 1.0 / (4.0 * t);
        let bound = 1.0 / (20.0 * t);
        let ratios: Vec<f64> = (1..=10)
            .flat_map(|k| [k as f64, -(k as f64)])
            .map(|k| k / 10.0 * bound)
            .map(|d| {
                let e = pid_error(
                    model.expected_signal(d + q, t),
                    model.expected_signal(d - q, t),
                    t,
                    model.contrast,
                );
                e / d
            })
            .collect();
        let reference = -std::f64::consts::FRAC_PI_2;
        for r in ratios {
            assert!((r / reference - 1.0).abs() < 0.05, "ratio {r}");
        }
    }

    #[test]
    fn open_loop_pid_reproduces_free_lo() {
        let lo = LoModel::new(0.3, 1e-11, 0.01, 6.834e9).unwrap();
        let model = SignalModel::new(0.0, 1540.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = run_pid_lock(&lo, &model, 0.02, PidGains::open_loop(), 50, 0.0, &mut rng).unwrap();
        assert!(trace.cycles.iter().all(|c| c.correction == 0.0));

        // Replay the LO alone with the same draws: two measurements per cycle
        // consume two normals after each LO step.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut free = lo.clone();
        for c in &trace.cycles {
            free = lo_evolve(&free, 0.04, &mut rng);
            let _: f64 = StandardNormal.sample(&mut rng);
            let _: f64 = StandardNormal.sample(&mut rng);
            assert_eq!(c.delta_nu, free.detuning());
        }
    }

    #[test]
    fn noiseless_pid_converges() {
        let lo = LoModel::quiet(2.0, 6.834e9).unwrap();
        let model = SignalModel::<f64>::new(0.0, 1e12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trace = run_pid_lock(&lo, &model, 0.02, PidGains::default(), 20, 0.0, &mut rng).unwrap();
        let last = trace.cycles.last().unwrap();
        assert!(last.delta_nu.abs() < 0.02, "{}", last.delta_nu);
        assert_relative_eq!(trace.cycle_duration, 0.04);
    }

    #[test]
    fn bfe_lock_cycle_time_and_convergence() {
        let scheme = Scheme::new(1.25, 1, 6, 13, 0.02).unwrap();
        let config = lock_config(scheme, 1540.0).unwrap();
        let lo = LoModel::quiet(3.0, 6.834e9).unwrap();
        let model = SignalModel::<f64>::new(0.0, 1e12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trace = run_bfe_lock(&lo, &model, &config, 3, 0.0, &mut rng).unwrap();
        assert!((trace.cycle_duration - 0.199).abs() < 5e-4);
        let bound = crate::schedule::predicted_precision(&scheme, 1540.0);
        assert!(trace.cycles.iter().all(|c| c.delta_nu.abs() < bound));
    }

    #[test]
    fn zero_cycles_is_empty() {
        let lo = LoModel::quiet(0.0, 1.0).unwrap();
        let model = SignalModel::new(0.0, 1540.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = run_pid_lock(&lo, &model, 0.02, PidGains::default(), 0, 0.0, &mut rng).unwrap();
        assert!(trace.is_empty());
    }
}
