//! The adaptive estimation loop: information-gain LO selection, random
//! enhancement, prior resets, frequency-shift compensation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{
    bayes_update, gaussian_prior, uniform_prior, FrequencyInterval, GridDistribution, DEFAULT_GRID_SIZE,
    DEGENERATE_MASS,
};
use crate::scalar::Real;
use crate::schedule::{build_schedule, Schedule, Scheme};
use crate::signal::{variance_floor, EnsembleLikelihood, ShiftModel};

pub const DEFAULT_QUADRATURE_POINTS: usize = 64;
pub const MIN_QUADRATURE_POINTS: usize = 8;
pub const DEFAULT_LO_CANDIDATES: usize = 128;

/// Terms with `exp(-x)`, `x` above this, are dropped (`e^-30 ≈ 1e-13`).
const EXPONENT_CUTOFF: f64 = 30.0;
/// Prior nodes below this fraction of the peak density are ignored by the utility.
const PRIOR_SUPPORT_FLOOR: f64 = 1e-18;
/// Largest utility node spacing, in fringe radians times `√R`.
const PHASE_STEP: f64 = 0.4;
/// Allowed prior error from coarsening, relative to the peak density.
const RESAMPLE_TOLERANCE: f64 = 1e-4;
/// Relative information-gain margin below which candidates are near-tied.
pub const NEAR_TIE: f64 = 5e-3;
/// Utilities closer than `TIE_RELATIVE·|max| + TIE_ABSOLUTE` count as tied.
const TIE_RELATIVE: f64 = 1e-10;
const TIE_ABSOLUTE: f64 = 1e-12;

/// When the random frequency perturbation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Enhancement {
    Disabled,
    /// On plateau iterations, where `T_i = T_max`.
    Plateau,
    /// Only when `T_i > T_max`, which a clamped schedule never produces.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoSelection {
    /// Maximize the expected information gain.
    Utility,
    /// Fixed mid-fringe point `f_est + 1/(4T_i)`.
    MidFringe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfeConfig<T> {
    pub scheme: Scheme<T>,
    pub r: T,
    pub initial_interval: FrequencyInterval<T>,
    pub grid_size: usize,
    pub utility_quadrature_points: usize,
    pub lo_candidate_count: usize,
    pub enhancement: Enhancement,
    pub selection: LoSelection,
    /// Shift the estimator compensates for at each Ramsey time.
    pub shift: ShiftModel<T>,
    pub seed: u64,
}

impl<T: Real> BfeConfig<T> {
    /// Config with an initial interval of width `1/T_1` centred on `center`.
    pub fn centered(scheme: Scheme<T>, r: T, center: T) -> Result<Self> {
        let t1 = build_schedule(&scheme).t_first();
        let interval = FrequencyInterval::centered(center, T::one() / t1)?;
        Self::new(scheme, r, interval)
    }

    pub fn new(scheme: Scheme<T>, r: T, initial_interval: FrequencyInterval<T>) -> Result<Self> {
        Self {
            scheme,
            r,
            initial_interval,
            grid_size: DEFAULT_GRID_SIZE,
            utility_quadrature_points: DEFAULT_QUADRATURE_POINTS,
            lo_candidate_count: DEFAULT_LO_CANDIDATES,
            enhancement: Enhancement::Plateau,
            selection: LoSelection::Utility,
            shift: ShiftModel::Zero,
            seed: 0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.scheme.validated()?;
        if !(self.r > T::zero()) {
            return Err(Error::Config(format!("R must be positive, got {}", self.r)));
        }
        let t1 = build_schedule(&self.scheme).t_first();
        let required = T::one() / t1;
        if self.initial_interval.width() < required * (T::one() - T::lit(1e-9)) {
            return Err(Error::Config(format!(
                "initial interval width {} Hz is narrower than 1/T_1 = {} Hz",
                self.initial_interval.width(),
                required
            )));
        }
        if self.utility_quadrature_points < MIN_QUADRATURE_POINTS {
            return Err(Error::Config(format!(
                "utility quadrature needs at least {MIN_QUADRATURE_POINTS} points"
            )));
        }
        if self.lo_candidate_count == 0 {
            return Err(Error::Config("need at least one LO candidate".into()));
        }
        if self.grid_size < crate::posterior::MIN_GRID_SIZE {
            return Err(Error::Config(format!("grid_size {} too small", self.grid_size)));
        }
        Ok(self)
    }
}

/// Precomputed state for evaluating the expected information gain of many
/// candidate LO frequencies against one prior.
///
/// The outer integral over `p_e` runs on a fixed trapezoid grid. For a prior
/// node with fringe value `s_k` the outcome density is `N(p_e; s_k, σ_k²)`
/// with `σ_k² = s_k(1−s_k)/R`, widened to at least [`OUTCOME_WIDTH_FLOOR`]
/// grid spacings and renormalized over the grid. Near `p_e ∈ {0, 1}` the raw
/// density is far narrower than the grid, and sampling it there overcounts
/// those outcomes by an order of magnitude, making the fringe extrema look
/// most informative.
///
/// With `a_k` the quadrature-weighted prior and `L_qk` the outcome density at
/// the `q`-th `p_e` node,
///
/// ```text
/// Z_q      = Σ_k a_k L_qk
/// Z_q·U_q  = Σ_k a_k L_qk (ln L_qk + ln p_k) − Z_q ln Z_q + Z_q H_prior
/// U(f)     = Σ_q v_q Z_q U_q
/// ```
///
/// which is the posterior-minus-prior negentropy weighted by the evidence,
/// without materializing each hypothetical posterior.
pub struct UtilityEvaluator<T> {
    r: T,
    /// Phases `θ_k = 2πT_R(f_k − origin)` of the supported prior nodes.
    origin: T,
    angular_time: T,
    cos_phase: Vec<T>,
    sin_phase: Vec<T>,
    weighted_prior: Vec<T>,
    ln_prior: Vec<T>,
    /// `f_k − μ` for the prior mean `μ`.
    deviation: Vec<T>,
    prior_entropy: T,
    prior_variance: T,
    quadrature: PeQuadrature<T>,
    scratch: std::cell::RefCell<Scratch<T>>,
}

/// Merit of one candidate LO frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score<T> {
    /// Expected information gain in nats.
    pub information: T,
    /// Expected reduction of the posterior variance, Hz².
    pub variance_reduction: T,
}

/// Minimum outcome-density width in units of the `p_e` grid spacing.
pub const OUTCOME_WIDTH_FLOOR: f64 = 0.4;

struct Scratch<T> {
    evidence: Vec<T>,
    weighted_log: Vec<T>,
    first_moment: Vec<T>,
    window: Vec<T>,
}

/// Trapezoid grid on `[ε, 1−ε]`, `ε = 1/(2R)`, for the outcome integral.
#[derive(Debug, Clone)]
pub struct PeQuadrature<T> {
    eps: T,
    spacing: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> PeQuadrature<T> {
    pub fn new(r: T, points: usize) -> Result<Self> {
        if points < MIN_QUADRATURE_POINTS {
            return Err(Error::Precondition(format!(
                "utility quadrature needs at least {MIN_QUADRATURE_POINTS} points, got {points}"
            )));
        }
        if !(r > T::zero()) {
            return Err(Error::Precondition(format!("R must be positive, got {r}")));
        }
        let eps = variance_floor(r);
        let last = points - 1;
        let spacing = (T::one() - T::lit(2.0) * eps) / T::from_usize_lossy(last);
        let nodes = (0..points)
            .map(|q| if q == last { T::one() - eps } else { eps + spacing * T::from_usize_lossy(q) })
            .collect();
        let weights = (0..points)
            .map(|q| if q == 0 || q == last { spacing / T::lit(2.0) } else { spacing })
            .collect();
        Ok(Self {
            eps,
            spacing,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Index range of nodes within `reach` of `s`.
    fn window(&self, s: T, reach: T) -> std::ops::Range<usize> {
        let last = self.nodes.len() - 1;
        let lo = ((s - reach - self.eps) / self.spacing).ceil().max(T::zero());
        let hi = ((s + reach - self.eps) / self.spacing).floor();
        let lo = lo.to_usize().unwrap_or(0).min(last + 1);
        let hi = if hi < T::zero() { 0 } else { hi.to_usize().unwrap_or(last).min(last) + 1 };
        lo..hi.max(lo)
    }
}

impl<T: Real> UtilityEvaluator<T> {
    pub fn new(prior: &GridDistribution<T>, t_r: T, r: T, quadrature_points: usize) -> Result<Self> {
        Self::with_quadrature(prior, t_r, r, PeQuadrature::new(r, quadrature_points)?)
    }

    pub fn with_quadrature(prior: &GridDistribution<T>, t_r: T, r: T, quadrature: PeQuadrature<T>) -> Result<Self> {
        if !(t_r > T::zero()) || !(r > T::zero()) {
            return Err(Error::Precondition("utility needs T_R > 0 and R > 0".into()));
        }
        let coarse = coarsened(prior, t_r, r);
        let prior = coarse.as_ref().unwrap_or(prior);
        let peak = prior.weights().iter().copied().fold(T::zero(), T::max);
        let floor = peak * T::lit(PRIOR_SUPPORT_FLOOR);
        let origin = prior.interval().center();
        let angular_time = T::lit(2.0 * std::f64::consts::PI) * t_r;
        let mut cos_phase = Vec::new();
        let mut sin_phase = Vec::new();
        let mut weighted_prior = Vec::new();
        let mut ln_prior = Vec::new();
        let mut deviation = Vec::new();
        let mean = prior.mean();
        for (k, (f, p)) in prior.nodes().iter().zip(prior.weights()).enumerate() {
            if *p > floor && *p > T::zero() {
                deviation.push(*f - mean);
                let (sin, cos) = (angular_time * (*f - origin)).sin_cos();
                cos_phase.push(cos);
                sin_phase.push(sin);
                weighted_prior.push(prior.quadrature_weight(k) * *p);
                ln_prior.push(p.ln());
            }
        }
        let q = quadrature.len();
        Ok(Self {
            r,
            origin,
            angular_time,
            cos_phase,
            sin_phase,
            weighted_prior,
            ln_prior,
            deviation,
            prior_entropy: prior.entropy(),
            prior_variance: prior.std() * prior.std(),
            scratch: std::cell::RefCell::new(Scratch {
                evidence: vec![T::zero(); q],
                weighted_log: vec![T::zero(); q],
                first_moment: vec![T::zero(); q],
                window: Vec::with_capacity(q),
            }),
            quadrature,
        })
    }

    /// Number of prior nodes carrying non-negligible mass.
    pub fn support_len(&self) -> usize {
        self.cos_phase.len()
    }

    pub fn prior_variance(&self) -> T {
        self.prior_variance
    }

    pub fn utility(&self, f: T) -> T {
        self.score(f).information
    }

    /// Information gain together with the expected variance reduction
    /// `Σ_q v_q M_q²/Z_q`, where `M_q = Σ_k a_k L_qk (f_k − μ)`.
    pub fn score(&self, f: T) -> Score<T> {
        let quad = &self.quadrature;
        let mut scratch = self.scratch.borrow_mut();
        let Scratch {
            evidence,
            weighted_log,
            first_moment,
            window,
        } = &mut *scratch;
        for v in [&mut *evidence, &mut *weighted_log, &mut *first_moment] {
            v.iter_mut().for_each(|z| *z = T::zero());
        }

        let reach_factor = T::lit(2.0 * EXPONENT_CUTOFF).sqrt();
        let min_sigma = T::lit(OUTCOME_WIDTH_FLOOR) * quad.spacing;
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let h = quad.spacing;
        let (sin_f, cos_f) = (self.angular_time * (f - self.origin)).sin_cos();
        let nodes = self.cos_phase.iter().zip(&self.sin_phase);
        let prior_terms = self.weighted_prior.iter().zip(&self.ln_prior).zip(&self.deviation);
        for ((cos_k, sin_k), ((a, ln_p), dev)) in nodes.zip(prior_terms) {
            // cos(φ_f − θ_k) by angle addition
            let c = cos_f * *cos_k + sin_f * *sin_k;
            let s = (half * (T::one() + c)).max(T::zero()).min(T::one());
            let sigma = EnsembleLikelihood::sigma_for(s, self.r).max(min_sigma);
            let inv_two_var = half / (sigma * sigma);
            let range = quad.window(s, reach_factor * sigma);
            if range.is_empty() {
                continue;
            }
            // exp(−x_q) along the uniform p_e grid by the recurrence
            // l_{q±1} = l_q·r_q, r_{q±1} = r_q·c, seeded at the node nearest s.
            let start = range.start;
            window.clear();
            window.resize(range.len(), T::zero());
            let centre = (((s - quad.eps) / h).round().to_usize().unwrap_or(0)).clamp(start, range.end - 1);
            let d0 = quad.nodes[centre] - s;
            let l0 = (-(d0 * d0 * inv_two_var)).exp();
            let step = (-(two * h * h * inv_two_var)).exp();
            let mut l = l0;
            let mut ratio = (-((two * d0 * h + h * h) * inv_two_var)).exp();
            for w in &mut window[centre - start..] {
                *w = l;
                l = l * ratio;
                ratio = ratio * step;
            }
            let mut l = l0;
            let mut ratio = (-((h * h - two * d0 * h) * inv_two_var)).exp();
            for w in window[..centre - start].iter_mut().rev() {
                l = l * ratio;
                ratio = ratio * step;
                *w = l;
            }
            let mass = window
                .iter()
                .zip(&quad.weights[range.clone()])
                .fold(T::zero(), |m, (l, v)| m + *v * *l);
            if !(mass > T::zero()) {
                continue;
            }
            // Renormalizing absorbs the Gaussian prefactor and the mass lost
            // outside [ε, 1−ε].
            let offset = *ln_p - mass.ln();
            let scale = *a / mass;
            let targets = evidence[range.clone()]
                .iter_mut()
                .zip(&mut weighted_log[range.clone()])
                .zip(&mut first_moment[range.clone()]);
            for (((z, wl), m), (l, p)) in targets.zip(window.iter().zip(&quad.nodes[range])) {
                let d = *p - s;
                let al = scale * *l;
                *z = *z + al;
                *wl = *wl + al * (offset - d * d * inv_two_var);
                *m = *m + al * *dev;
            }
        }

        let degenerate = T::lit(DEGENERATE_MASS).max(T::min_positive_value());
        let mut information = T::zero();
        let mut variance_reduction = T::zero();
        let terms = evidence.iter().zip(weighted_log.iter()).zip(first_moment.iter());
        for (((z, wl), m), v) in terms.zip(&quad.weights) {
            if *z > degenerate {
                information = information + *v * (*wl - *z * z.ln() + *z * self.prior_entropy);
                variance_reduction = variance_reduction + *v * *m * *m / *z;
            }
        }
        Score {
            information,
            variance_reduction,
        }
    }
}

/// A coarser copy of a smooth prior for the utility sum, or `None` when the
/// full grid is needed.
///
/// Every outcome density spans about `1/√R` radians of fringe phase, so node
/// spacings below [`PHASE_STEP`]`/√R` integrate it to full precision. The
/// prior is resampled by linear interpolation, and the coarse grid is only
/// accepted if interpolating back reproduces every original node to within
/// [`RESAMPLE_TOLERANCE`] of the peak density.
fn coarsened<T: Real>(prior: &GridDistribution<T>, t_r: T, r: T) -> Option<GridDistribution<T>> {
    let fine = prior.grid_size() - 1;
    let width = prior.interval().width();
    let phase_step = T::lit(PHASE_STEP) / r.sqrt();
    let max_step = phase_step / (T::lit(2.0 * std::f64::consts::PI) * t_r);
    let mut intervals = (width / max_step).ceil().to_usize()?.max(crate::posterior::MIN_GRID_SIZE);
    let peak = prior.weights().iter().copied().fold(T::zero(), T::max);
    let tolerance = T::lit(RESAMPLE_TOLERANCE) * peak;
    while 2 * intervals <= fine {
        let step = width / T::from_usize_lossy(intervals);
        let lo = prior.interval().lo();
        let weights: Vec<T> = (0..=intervals)
            .map(|j| prior.density_at(lo + step * T::from_usize_lossy(j)))
            .collect();
        let candidate = GridDistribution::from_weights(*prior.interval(), weights).ok()?;
        let faithful = prior
            .nodes()
            .iter()
            .zip(prior.weights())
            .all(|(f, p)| (candidate.density_at(*f) - *p).abs() <= tolerance);
        if faithful {
            return Some(candidate);
        }
        intervals *= 2;
    }
    None
}

/// Expected Shannon-information gain (nats) of measuring at LO frequency `f`.
pub fn utility<T: Real>(prior: &GridDistribution<T>, f: T, t_r: T, r: T, quadrature_points: usize) -> Result<T> {
    Ok(UtilityEvaluator::new(prior, t_r, r, quadrature_points)?.utility(f))
}

/// Candidate LO frequencies: `count` points uniformly spanning the interval,
/// left end included. The right end is omitted since the fringe repeats with
/// period equal to the interval width in the estimation loop.
pub fn lo_candidates<T: Real>(interval: &FrequencyInterval<T>, count: usize) -> Vec<T> {
    let step = interval.width() / T::from_usize_lossy(count);
    (0..count)
        .map(|k| interval.lo() + step * T::from_usize_lossy(k))
        .collect()
}

/// Index of the maximum, preferring the lowest index among near-ties.
pub fn argmax_lowest<T: Real>(values: &[T]) -> usize {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let tol = T::lit(TIE_RELATIVE) * max.abs() + T::lit(TIE_ABSOLUTE);
    values.iter().position(|v| *v >= max - tol).unwrap_or(0)
}

/// Index of the best score.
///
/// Candidates whose information gain is within [`NEAR_TIE`] of the maximum
/// are indistinguishable at the accuracy of the outcome quadrature. Among
/// those the largest expected variance reduction wins, then the lowest index.
/// A delta-like prior scores zero everywhere and so selects index 0.
pub fn select_best<T: Real>(scores: &[Score<T>], prior_variance: T) -> usize {
    let max = scores.iter().map(|s| s.information).fold(T::neg_infinity(), T::max);
    let tol = T::lit(NEAR_TIE) * max.abs() + T::lit(TIE_ABSOLUTE);
    let near = || scores.iter().enumerate().filter(move |(_, s)| s.information >= max - tol);
    let best = near().map(|(_, s)| s.variance_reduction).fold(T::neg_infinity(), T::max);
    let vr_tol = T::lit(TIE_RELATIVE) * best.abs().max(prior_variance) + T::min_positive_value();
    near()
        .find(|(_, s)| s.variance_reduction >= best - vr_tol)
        .map_or(0, |(i, _)| i)
}

/// Candidate maximizing the utility over the prior's interval, see [`select_best`].
pub fn select_lo_frequency<T: Real>(prior: &GridDistribution<T>, t_r: T, r: T, config: &BfeConfig<T>) -> Result<T> {
    let evaluator = UtilityEvaluator::new(prior, t_r, r, config.utility_quadrature_points)?;
    let candidates = lo_candidates(prior.interval(), config.lo_candidate_count);
    let scores: Vec<Score<T>> = candidates.iter().map(|f| evaluator.score(*f)).collect();
    Ok(candidates[select_best(&scores, evaluator.prior_variance())])
}

/// Adds `ε ~ N(0, (2Δf_est)²)` to `f`.
pub fn random_enhancement<T: Real, R: Rng + ?Sized>(f: T, delta_f_est: T, rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    f + T::lit(2.0) * delta_f_est * T::lit(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    /// 1-based iteration index.
    pub index: u32,
    pub ramsey_time: T,
    pub interval: FrequencyInterval<T>,
    /// LO frequency chosen by the selection rule, after enhancement.
    pub lo_frequency: T,
    /// Random perturbation included in `lo_frequency` (zero when not applied).
    pub enhancement: T,
    pub shift: T,
    /// Frequency actually requested from the apparatus after shift compensation.
    pub applied_frequency: T,
    pub p_e: T,
    pub f_est: T,
    pub delta_f_est: T,
    /// Trapezoidal integral of the posterior after this iteration.
    pub posterior_mass: T,
    pub cumulative_time: T,
    /// The update annihilated the prior and the prior was kept.
    pub degenerate: bool,
    /// The reset width was raised to the grid resolution floor.
    pub sigma_floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub f_est: T,
    pub delta_f_est: T,
}

impl<T: Real> EstimationTrace<T> {
    pub fn degenerate_count(&self) -> usize {
        self.records.iter().filter(|r| r.degenerate).count()
    }
}

/// Runs the full estimation protocol against an injected measurement
/// function `measure(applied_frequency, ramsey_time) -> p_e`.
pub fn bfe_run<T: Real>(config: &BfeConfig<T>, mut measure: impl FnMut(T, T) -> T) -> Result<EstimationTrace<T>> {
    let config = config.clone().validated()?;
    let schedule: Schedule<T> = build_schedule(&config.scheme);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.grid_size;

    let mut prior = uniform_prior(config.initial_interval, n)?;
    let mut f_est = prior.mean();
    let mut delta_f_est = prior.std();
    let mut elapsed = T::zero();
    let mut records = Vec::with_capacity(schedule.len());

    for (idx, &t_r) in schedule.times.iter().enumerate() {
        let index = idx as u32 + 1;
        let mut sigma_floored = false;
        if index > 1 {
            let interval = FrequencyInterval::centered(f_est, T::one() / t_r)?;
            let floor = interval.width() / T::from_usize_lossy(2 * (n - 1));
            let sigma = if delta_f_est < floor {
                sigma_floored = true;
                floor
            } else {
                delta_f_est
            };
            prior = gaussian_prior(f_est, sigma, interval, n)?;
        }

        let mut f = match config.selection {
            LoSelection::Utility => select_lo_frequency(&prior, t_r, config.r, &config)?,
            LoSelection::MidFringe => f_est + T::one() / (T::lit(4.0) * t_r),
        };

        let enhance = match config.enhancement {
            Enhancement::Disabled => false,
            Enhancement::Plateau => schedule.is_plateau(idx),
            Enhancement::Literal => t_r > config.scheme.t_max,
        };
        let mut enhancement = T::zero();
        if enhance {
            let perturbed = random_enhancement(f, delta_f_est, &mut rng);
            enhancement = perturbed - f;
            f = perturbed;
        }

        let shift = config.shift.eval(t_r);
        let applied = f - shift;
        let p_e = measure(applied, t_r);
        let likelihood = EnsembleLikelihood::new(p_e, applied, shift, t_r, config.r)?;
        let degenerate = match bayes_update(&prior, |fc| likelihood.density(fc)) {
            Ok(post) => {
                prior = post;
                false
            }
            Err(Error::DegenerateUpdate { .. }) => true,
            Err(e) => return Err(e),
        };
        f_est = prior.mean();
        delta_f_est = prior.std();
        elapsed = elapsed + t_r;

        records.push(IterationRecord {
            index,
            ramsey_time: t_r,
            interval: *prior.interval(),
            lo_frequency: f,
            enhancement,
            shift,
            applied_frequency: applied,
            p_e,
            f_est,
            delta_f_est,
            posterior_mass: prior.integral(),
            cumulative_time: elapsed,
            degenerate,
            sigma_floored,
        });
    }

    Ok(EstimationTrace {
        records,
        f_est,
        delta_f_est,
    })
}
