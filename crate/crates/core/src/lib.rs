//! Adaptive Bayesian frequency estimation for Ramsey-interrogated atomic clocks.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for callers that do not care.

pub mod adaptive;
pub mod analysis;
pub mod error;
pub mod locking;
pub mod montecarlo;
pub mod posterior;
pub mod scalar;
pub mod schedule;
pub mod signal;

pub use adaptive::{
    bfe_run, random_enhancement, select_lo_frequency, utility, BfeConfig, Enhancement, EstimationTrace,
    IterationRecord, LoSelection, UtilityEvaluator,
};
pub use analysis::{allan_deviation, fit_loglog_slope, improvement_db, AllanPoint, FractionalSeries, LogLogFit};
pub use error::{Error, Result};
pub use locking::{lo_evolve, pid_error, run_bfe_lock, run_pid_lock, LoModel, LockCycle, LockTrace, PidGains};
pub use posterior::{bayes_update, gaussian_prior, regrid, uniform_prior, FrequencyInterval, GridDistribution};
pub use scalar::Real;
pub use schedule::{build_schedule, precision_curve, predicted_precision, total_time, Schedule, Scheme};
pub use signal::{gaussian_likelihood, ramsey_signal, simulate_measurement, ShiftModel, SignalModel};

pub type Interval = FrequencyInterval<f64>;
pub type Grid = GridDistribution<f64>;
pub type SchemeF64 = Scheme<f64>;
pub type ScheduleF64 = Schedule<f64>;
pub type Signal = SignalModel<f64>;
pub type Config = BfeConfig<f64>;
pub type Trace = EstimationTrace<f64>;
pub type Lo = LoModel<f64>;
pub type Lock = LockTrace<f64>;
pub type Series = FractionalSeries<f64>;

pub type IntervalF32 = FrequencyInterval<f32>;
pub type GridF32 = GridDistribution<f32>;
pub type SchemeF32 = Scheme<f32>;
pub type ConfigF32 = BfeConfig<f32>;
