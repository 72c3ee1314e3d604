//! Interrogation-time sequences and their closed-form precision predictions.
//!
//! A scheme `{a, g, M̃, M_b}` ramps the Ramsey time geometrically, by a factor
//! `a` every `g` iterations, until index `j = M_b − M̃`, then holds it at
//! `T_max` for the remaining iterations:
//!
//! ```text
//! T_i = T_max / a^⌈(j − i)/g⌉   for i < j
//! T_i = T_max                   for i ≥ j
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme<T> {
    /// Growth ratio `a > 1`.
    pub growth: T,
    /// Iterations per growth step `g ≥ 1`.
    pub steps_per_level: u32,
    /// Plateau length `M̃` at `T_max`.
    pub plateau: u32,
    /// Total iteration count `M_b`.
    pub iterations: u32,
    /// Maximum Ramsey time (s).
    pub t_max: T,
    /// Available minimum Ramsey time (s). Generated times below it are clamped.
    pub t_min: Option<T>,
}

impl<T: Real> Scheme<T> {
    pub fn new(growth: T, steps_per_level: u32, plateau: u32, iterations: u32, t_max: T) -> Result<Self> {
        Self {
            growth,
            steps_per_level,
            plateau,
            iterations,
            t_max,
            t_min: None,
        }
        .validated()
    }

    pub fn with_t_min(mut self, t_min: T) -> Result<Self> {
        self.t_min = Some(t_min);
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.growth > T::one()) || !self.growth.is_finite() {
            return Err(Error::Config(format!("growth ratio a must exceed 1, got {}", self.growth)));
        }
        if self.steps_per_level == 0 {
            return Err(Error::Config("steps per level g must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iteration count M_b must be positive".into()));
        }
        if self.plateau >= self.iterations {
            return Err(Error::Config(format!(
                "plateau length {} must be below iteration count {}",
                self.plateau, self.iterations
            )));
        }
        if !(self.t_max > T::zero()) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("T_max must be positive, got {}", self.t_max)));
        }
        if let Some(t_min) = self.t_min {
            if !(t_min > T::zero()) || t_min > self.t_max {
                return Err(Error::Config(format!(
                    "T_min must lie in (0, T_max], got {t_min} with T_max {}",
                    self.t_max
                )));
            }
        }
        Ok(self)
    }

    /// 1-based index `j` at which the ramp reaches `T_max`.
    pub fn ramp_end(&self) -> u32 {
        self.iterations - self.plateau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScheduleWarning {
    /// A generated time fell below `T_min` and was raised to it.
    Clamped { index: u32, generated: f64, t_min: f64 },
    /// The ramp end is not a multiple of `g`.
    RampNotMultipleOfSteps { ramp_end: u32, steps_per_level: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub times: Vec<T>,
    pub scheme: Scheme<T>,
    pub warnings: Vec<ScheduleWarning>,
}

impl<T: Real> Schedule<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Shortest Ramsey time in the sequence, i.e. `T_1`.
    pub fn t_first(&self) -> T {
        self.times[0]
    }

    /// Cumulative interrogation times `t_j = Σ_{i≤j} T_i`.
    pub fn cumulative(&self) -> Vec<T> {
        self.times
            .iter()
            .scan(T::zero(), |acc, t| {
                *acc = *acc + *t;
                Some(*acc)
            })
            .collect()
    }

    pub fn is_plateau(&self, index: usize) -> bool {
        index as u32 + 1 >= self.scheme.ramp_end()
    }
}

pub fn build_schedule<T: Real>(scheme: &Scheme<T>) -> Schedule<T> {
    let j = scheme.ramp_end();
    let g = scheme.steps_per_level;
    let mut warnings = Vec::new();
    if g > 1 && j % g != 0 {
        warnings.push(ScheduleWarning::RampNotMultipleOfSteps {
            ramp_end: j,
            steps_per_level: g,
        });
    }
    let times = (1..=scheme.iterations)
        .map(|i| {
            let generated = if i >= j {
                scheme.t_max
            } else {
                let exponent = (j - i).div_ceil(g);
                scheme.t_max / scheme.growth.powi(exponent as i32)
            };
            match scheme.t_min {
                Some(t_min) if generated < t_min => {
                    warnings.push(ScheduleWarning::Clamped {
                        index: i,
                        generated: generated.as_f64(),
                        t_min: t_min.as_f64(),
                    });
                    t_min
                }
                _ => generated,
            }
        })
        .collect();
    Schedule {
        times,
        scheme: *scheme,
        warnings,
    }
}

pub fn total_time<T: Real>(schedule: &Schedule<T>) -> T {
    schedule.times.iter().copied().sum()
}

/// Which closed form [`predicted_precision`] applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecisionForm {
    /// `√(1 + 2/(a−1)) / (2π√R T)` with `T` the total time.
    Geometric,
    /// `√(1 − 1/a²) / (2π√g √R T_max)`.
    Stepped,
    /// `√(1/(M̃ + a²/(a²−1))) / (2π√R T_max)`; with `g > 1` uses `a^(1/g)`.
    Plateau,
}

pub fn precision_form<T: Real>(scheme: &Scheme<T>) -> PrecisionForm {
    if scheme.plateau > 0 {
        PrecisionForm::Plateau
    } else if scheme.steps_per_level > 1 {
        PrecisionForm::Stepped
    } else {
        PrecisionForm::Geometric
    }
}

/// Analytic final standard deviation (Hz) of the estimator for `scheme`.
pub fn predicted_precision<T: Real>(scheme: &Scheme<T>, r: T) -> T {
    let two_pi_sqrt_r = T::TAU() * r.sqrt();
    let a = scheme.growth;
    let one = T::one();
    match precision_form(scheme) {
        PrecisionForm::Plateau => {
            let a_eff = a.powf(one / T::from_u32(scheme.steps_per_level).unwrap());
            let a2 = a_eff * a_eff;
            let plateau = T::from_u32(scheme.plateau).unwrap();
            (one / (plateau + a2 / (a2 - one))).sqrt() / (two_pi_sqrt_r * scheme.t_max)
        }
        PrecisionForm::Stepped => {
            let g = T::from_u32(scheme.steps_per_level).unwrap();
            (one - one / (a * a)).sqrt() / (two_pi_sqrt_r * g.sqrt() * scheme.t_max)
        }
        PrecisionForm::Geometric => {
            let total = total_time(&build_schedule(scheme));
            (one + T::lit(2.0) / (a - one)).sqrt() / (two_pi_sqrt_r * total)
        }
    }
}

/// Information-limited precision after each iteration,
/// `1/(2π√R·√Σ_{i≤j} T_i²)`. The closed forms of [`predicted_precision`] are
/// its long-schedule limits.
pub fn precision_curve<T: Real>(schedule: &Schedule<T>, r: T) -> Vec<T> {
    let two_pi_sqrt_r = T::TAU() * r.sqrt();
    schedule
        .times
        .iter()
        .scan(T::zero(), |acc, t| {
            *acc = *acc + *t * *t;
            Some(T::one() / (two_pi_sqrt_r * acc.sqrt()))
        })
        .collect()
}

/// Growth ratio `a = T/(T − g·T_max)` that spends budget `T` on a `g`-step ramp.
pub fn solve_ratio_for_budget<T: Real>(total: T, steps_per_level: u32, t_max: T) -> Result<T> {
    let g = T::from_u32(steps_per_level).unwrap();
    if !(total > g * t_max) {
        return Err(Error::InfeasibleBudget(format!(
            "budget {total} s must exceed g·T_max = {} s",
            g * t_max
        )));
    }
    Ok(total / (total - g * t_max))
}

/// Growth ratio `a = (T − M̃T_max)/(T − (M̃+1)T_max)` for a ramp followed by a plateau.
pub fn solve_ratio_for_plateau_budget<T: Real>(total: T, plateau: u32, t_max: T) -> Result<T> {
    let m = T::from_u32(plateau).unwrap();
    let denom = total - (m + T::one()) * t_max;
    if !(denom > T::zero()) {
        return Err(Error::InfeasibleBudget(format!(
            "budget {total} s must exceed (M̃+1)·T_max = {} s",
            (m + T::one()) * t_max
        )));
    }
    Ok((total - m * t_max) / denom)
}

/// Inputs to [`iteration_count`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationBudget<T> {
    /// `M_b = g[log_a(T_max/T_min) + 1]`.
    Stepped { growth: T, steps_per_level: u32, t_max: T, t_min: T },
    /// `M_b = M̃ + log_a(T_max/T_min) + 1`.
    Plateau { growth: T, plateau: u32, t_max: T, t_min: T },
    /// `M_b = [T − aT_max/(a−1)]/T_max + log_a(T_max/T_min) + 1`.
    TotalTime { growth: T, total: T, t_max: T, t_min: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationCount {
    pub rounded: u32,
    pub exact: f64,
    /// True when rounding moved the value up.
    pub rounded_up: bool,
}

pub fn iteration_count<T: Real>(budget: IterationBudget<T>) -> IterationCount {
    let log_ratio = |a: T, t_max: T, t_min: T| (t_max / t_min).ln().as_f64() / a.ln().as_f64();
    let exact = match budget {
        IterationBudget::Stepped {
            growth,
            steps_per_level,
            t_max,
            t_min,
        } => steps_per_level as f64 * (log_ratio(growth, t_max, t_min) + 1.0),
        IterationBudget::Plateau {
            growth,
            plateau,
            t_max,
            t_min,
        } => plateau as f64 + log_ratio(growth, t_max, t_min) + 1.0,
        IterationBudget::TotalTime {
            growth,
            total,
            t_max,
            t_min,
        } => {
            let a = growth.as_f64();
            (total.as_f64() - a * t_max.as_f64() / (a - 1.0)) / t_max.as_f64()
                + log_ratio(growth, t_max, t_min)
                + 1.0
        }
    };
    // snap values within rounding noise of an integer before rounding half up
    let snapped = if (exact - exact.round()).abs() < 1e-9 { exact.round() } else { exact };
    let rounded = (snapped + 0.5).floor().max(0.0);
    IterationCount {
        rounded: rounded as u32,
        exact,
        rounded_up: rounded > exact,
    }
}
