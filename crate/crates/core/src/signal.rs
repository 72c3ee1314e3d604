//! Ramsey/CPT signal models, likelihoods, and the stochastic measurement
//! oracle that stands in for the experiment.
//!
//! Frequencies are in Hz and phases follow `2π·(f − f_c + f_s)·T_R`
//! everywhere, including the CPT excited-state envelope.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn phase<T: Real>(f: T, f_c: T, f_s: T, t_r: T) -> T {
    T::TAU() * (f - f_c + f_s) * t_r
}

/// Normalized Ramsey signal `½[1 + cos 2π(f − f_c + f_s)T_R]`.
pub fn ramsey_signal<T: Real>(f: T, f_c: T, f_s: T, t_r: T) -> T {
    let half = T::lit(0.5);
    half * (T::one() + phase(f, f_c, f_s, t_r).cos())
}

/// Single-particle likelihood of outcome `u ∈ {0, 1}`.
pub fn single_particle_likelihood<T: Real>(u: u8, f_c: T, f: T, f_s: T, t_r: T) -> Result<T> {
    let l1 = ramsey_signal(f, f_c, f_s, t_r);
    match u {
        1 => Ok(l1),
        0 => Ok(T::one() - l1),
        _ => Err(Error::Precondition(format!("binary outcome must be 0 or 1, got {u}"))),
    }
}

/// Floor applied to `p_e` before forming the likelihood variance: `1/(2R)`.
pub fn variance_floor<T: Real>(r: T) -> T {
    (T::one() / (T::lit(2.0) * r)).min(T::lit(0.5))
}

/// Gaussian ensemble likelihood of an observed `p_e`, with the width fixed
/// once per observation so it can be evaluated cheaply across a grid of `f_c`.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleLikelihood<T> {
    p_e: T,
    f: T,
    f_s: T,
    t_r: T,
    inv_two_var: T,
    peak: T,
}

impl<T: Real> EnsembleLikelihood<T> {
    pub fn new(p_e: T, f: T, f_s: T, t_r: T, r: T) -> Result<Self> {
        if !(p_e >= T::zero() && p_e <= T::one()) {
            return Err(Error::Precondition(format!("p_e must lie in [0, 1], got {p_e}")));
        }
        if !(r > T::zero()) {
            return Err(Error::Precondition(format!("R must be positive, got {r}")));
        }
        let sigma = Self::sigma_for(p_e, r);
        Ok(Self {
            p_e,
            f,
            f_s,
            t_r,
            inv_two_var: T::one() / (T::lit(2.0) * sigma * sigma),
            peak: T::one() / (T::TAU().sqrt() * sigma),
        })
    }

    /// `σ = sqrt(p(1−p)/R)` with `p` clamped to `[1/(2R), 1 − 1/(2R)]`.
    pub fn sigma_for(p_e: T, r: T) -> T {
        let eps = variance_floor(r);
        let p = p_e.max(eps).min(T::one() - eps);
        (p * (T::one() - p) / r).sqrt()
    }

    pub fn sigma(&self) -> T {
        T::one() / (T::lit(2.0) * self.inv_two_var).sqrt()
    }

    pub fn density(&self, f_c: T) -> T {
        let d = self.p_e - ramsey_signal(self.f, f_c, self.f_s, self.t_r);
        self.peak * (-(d * d) * self.inv_two_var).exp()
    }
}

/// Gaussian density of `p_e` centred on `L_1(f_c, f)`.
pub fn gaussian_likelihood<T: Real>(p_e: T, f_c: T, f: T, f_s: T, t_r: T, r: T) -> Result<T> {
    Ok(EnsembleLikelihood::new(p_e, f, f_s, t_r, r)?.density(f_c))
}

/// Frequency shift `f_s` as a function of the Ramsey time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum ShiftModel<T> {
    #[default]
    Zero,
    Constant(T),
    /// Piecewise-linear table over strictly increasing Ramsey times,
    /// held constant beyond either end.
    Table { times: Vec<T>, shifts: Vec<T> },
}

impl<T: Real> ShiftModel<T> {
    pub fn table(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("shift table needs at least one row".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("shift table times must be strictly increasing".into()));
        }
        if points.iter().any(|(t, s)| !t.is_finite() || !s.is_finite()) {
            return Err(Error::Config("shift table entries must be finite".into()));
        }
        let (times, shifts) = points.into_iter().unzip();
        Ok(Self::Table { times, shifts })
    }

    pub fn eval(&self, t_r: T) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Constant(c) => *c,
            Self::Table { times, shifts } => {
                let n = times.len();
                if t_r <= times[0] {
                    return shifts[0];
                }
                if t_r >= times[n - 1] {
                    return shifts[n - 1];
                }
                let k = times.partition_point(|t| *t <= t_r) - 1;
                let w = (t_r - times[k]) / (times[k + 1] - times[k]);
                shifts[k] + w * (shifts[k + 1] - shifts[k])
            }
        }
    }
}

/// Ramsey response and noise of the simulated apparatus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel<T> {
    /// Ground-truth clock transition frequency (Hz, relative to nominal).
    pub f_c_true: T,
    /// Effective SNR parameter of one ensemble measurement.
    pub r: T,
    pub shift: ShiftModel<T>,
    /// Fringe contrast in (0, 1].
    pub contrast: T,
}

impl<T: Real> SignalModel<T> {
    pub fn new(f_c_true: T, r: T) -> Result<Self> {
        Self {
            f_c_true,
            r,
            shift: ShiftModel::Zero,
            contrast: T::one(),
        }
        .validated()
    }

    pub fn with_shift(mut self, shift: ShiftModel<T>) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_contrast(mut self, contrast: T) -> Result<Self> {
        self.contrast = contrast;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.r > T::zero()) {
            return Err(Error::Config(format!("R must be positive, got {}", self.r)));
        }
        if !(self.contrast > T::zero() && self.contrast <= T::one()) {
            return Err(Error::Config(format!("contrast must lie in (0, 1], got {}", self.contrast)));
        }
        if !self.f_c_true.is_finite() {
            return Err(Error::Config("true transition frequency must be finite".into()));
        }
        Ok(self)
    }

    /// Noise-free, contrast-scaled signal at LO frequency `f`.
    pub fn expected_signal(&self, f: T, t_r: T) -> T {
        let half = T::lit(0.5);
        let f_s = self.shift.eval(t_r);
        half * (T::one() + self.contrast * phase(f, self.f_c_true, f_s, t_r).cos())
    }
}

/// `f_s` the model predicts at Ramsey time `t_r`.
pub fn frequency_shift<T: Real>(model: &SignalModel<T>, t_r: T) -> T {
    model.shift.eval(t_r)
}

/// One noisy normalized signal: `s + η`, `η ~ N(0, s(1−s)/R)`, clamped to [0, 1].
pub fn simulate_measurement<T: Real, R: Rng + ?Sized>(model: &SignalModel<T>, f: T, t_r: T, rng: &mut R) -> T {
    let s = model.expected_signal(f, t_r);
    let sd = (s * (T::one() - s)).max(T::zero()).sqrt() / model.r.sqrt();
    let z: f64 = StandardNormal.sample(rng);
    (s + sd * T::lit(z)).max(T::zero()).min(T::one())
}

/// Exact binomial alternative: fraction of `atoms` found in the bright state.
pub fn simulate_binomial<T: Real, R: Rng + ?Sized>(
    model: &SignalModel<T>,
    f: T,
    t_r: T,
    atoms: u64,
    rng: &mut R,
) -> Result<T> {
    if atoms == 0 {
        return Err(Error::Precondition("binomial measurement needs at least one atom".into()));
    }
    let s = model.expected_signal(f, t_r).as_f64().clamp(0.0, 1.0);
    let k = Binomial::new(atoms, s)
        .map_err(|e| Error::Precondition(format!("binomial draw: {e}")))?
        .sample(rng);
    Ok(T::lit(k as f64 / atoms as f64))
}

/// Physical parameters of the CPT interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptPhysicalParams<T> {
    /// Average Rabi frequency (rad/s).
    pub omega: T,
    /// Excited-state decay rate (rad/s).
    pub gamma: T,
    /// Single-photon detuning (rad/s).
    pub delta: T,
    /// Preparation pulse duration (s).
    pub tau_p: T,
    /// Detection pulse duration (s).
    pub tau_d: T,
}

impl<T: Real> CptPhysicalParams<T> {
    pub fn new(omega: T, gamma: T, delta: T, tau_p: T, tau_d: T) -> Result<Self> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(omega) && pos(gamma) && pos(tau_p) && pos(tau_d)) || !delta.is_finite() {
            return Err(Error::Config(
                "CPT parameters need positive Ω, Γ, τ_p, τ_d and finite δ".into(),
            ));
        }
        Ok(Self {
            omega,
            gamma,
            delta,
            tau_p,
            tau_d,
        })
    }

    /// `α = Ω²/(Γ² + 3Ω² + 4δ²)`, always in (0, 1/3].
    pub fn alpha(&self) -> T {
        let o2 = self.omega * self.omega;
        o2 / (self.gamma * self.gamma + T::lit(3.0) * o2 + T::lit(4.0) * self.delta * self.delta)
    }
}

/// Excited-state amplitude of a CPT-Ramsey sequence.
pub fn cpt_excited_probability<T: Real>(params: &CptPhysicalParams<T>, f: T, f_c: T, f_s: T, t_r: T) -> T {
    let alpha = params.alpha();
    let ag = alpha * params.gamma;
    let prep = T::one() - (-ag * params.tau_p).exp();
    let sec = (T::one() / alpha.cos()).abs();
    alpha * (-ag * params.tau_d).exp() * (T::one() - prep * sec * phase(f, f_c, f_s, t_r).cos())
}
