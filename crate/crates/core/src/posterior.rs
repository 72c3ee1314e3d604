//! Grid representation of the probability density over the clock transition
//! frequency.
//!
//! Densities live on `grid_size` uniformly spaced nodes that include both
//! interval endpoints. Every integral (normalization, moments, entropy) uses
//! the trapezoidal rule on that grid, and every constructor or update returns
//! a density whose trapezoidal integral is one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_GRID_SIZE: usize = 16;
pub const DEFAULT_GRID_SIZE: usize = 2048;

/// Total posterior mass below which an update is reported as degenerate.
pub const DEGENERATE_MASS: f64 = 1e-300;

fn degenerate_threshold<T: Real>() -> T {
    T::lit(DEGENERATE_MASS).max(T::min_positive_value())
}

/// Closed frequency interval `[lo, hi]` in Hz, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyInterval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> FrequencyInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::Config(format!(
                "frequency interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn centered(center: T, width: T) -> Result<Self> {
        let half = width / T::lit(2.0);
        Self::new(center - half, center + half)
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn center(&self) -> T {
        (self.lo + self.hi) / T::lit(2.0)
    }

    pub fn contains(&self, f: T) -> bool {
        f >= self.lo && f <= self.hi
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

/// Probability density sampled on a uniform grid over a [`FrequencyInterval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDistribution<T> {
    interval: FrequencyInterval<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
}

fn check_grid_size(grid_size: usize) -> Result<()> {
    if grid_size < MIN_GRID_SIZE {
        return Err(Error::Config(format!(
            "grid_size {grid_size} below minimum {MIN_GRID_SIZE}"
        )));
    }
    Ok(())
}

fn grid_nodes<T: Real>(interval: &FrequencyInterval<T>, grid_size: usize) -> Vec<T> {
    let h = interval.width() / T::from_usize_lossy(grid_size - 1);
    let mut nodes: Vec<T> = (0..grid_size)
        .map(|k| interval.lo + h * T::from_usize_lossy(k))
        .collect();
    nodes[grid_size - 1] = interval.hi;
    nodes
}

/// Trapezoidal integral of `values` sampled with spacing `h`.
pub(crate) fn trapezoid<T: Real>(values: impl Iterator<Item = T>, h: T) -> T {
    let mut sum = T::zero();
    let mut first = None;
    let mut last = T::zero();
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum = sum + v;
        last = v;
    }
    match first {
        None => T::zero(),
        Some(first) => h * (sum - (first + last) / T::lit(2.0)),
    }
}

impl<T: Real> GridDistribution<T> {
    /// Builds a distribution from raw non-negative weights, normalizing them.
    pub fn from_weights(interval: FrequencyInterval<T>, weights: Vec<T>) -> Result<Self> {
        check_grid_size(weights.len())?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < T::zero()) {
            return Err(Error::Precondition(format!(
                "density weights must be finite and non-negative, found {w}"
            )));
        }
        let nodes = grid_nodes(&interval, weights.len());
        Self::normalized(interval, nodes, weights)
    }

    /// Samples `density` on the grid and normalizes.
    pub fn from_density(
        interval: FrequencyInterval<T>,
        grid_size: usize,
        density: impl Fn(T) -> T,
    ) -> Result<Self> {
        check_grid_size(grid_size)?;
        let weights = grid_nodes(&interval, grid_size)
            .into_iter()
            .map(density)
            .collect();
        Self::from_weights(interval, weights)
    }

    fn normalized(interval: FrequencyInterval<T>, nodes: Vec<T>, mut weights: Vec<T>) -> Result<Self> {
        let h = interval.width() / T::from_usize_lossy(nodes.len() - 1);
        let mass = trapezoid(weights.iter().copied(), h);
        if !(mass > degenerate_threshold::<T>()) || !mass.is_finite() {
            return Err(Error::DegenerateUpdate { mass: mass.as_f64() });
        }
        for w in &mut weights {
            *w = *w / mass;
        }
        Ok(Self {
            interval,
            nodes,
            weights,
        })
    }

    pub fn interval(&self) -> &FrequencyInterval<T> {
        &self.interval
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Density values (1/Hz) at each node.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self) -> T {
        self.interval.width() / T::from_usize_lossy(self.nodes.len() - 1)
    }

    /// Trapezoidal quadrature weight of node `k`.
    pub fn quadrature_weight(&self, k: usize) -> T {
        let h = self.spacing();
        if k == 0 || k + 1 == self.nodes.len() {
            h / T::lit(2.0)
        } else {
            h
        }
    }

    pub fn integral(&self) -> T {
        trapezoid(self.weights.iter().copied(), self.spacing())
    }

    /// Posterior mean, the frequency estimator.
    pub fn mean(&self) -> T {
        let h = self.spacing();
        trapezoid(self.nodes.iter().zip(&self.weights).map(|(f, p)| *f * *p), h)
    }

    /// Posterior standard deviation. Rounding-negative variance clamps to zero.
    pub fn std(&self) -> T {
        let h = self.spacing();
        let mu = self.mean();
        let var = trapezoid(
            self.nodes.iter().zip(&self.weights).map(|(f, p)| {
                let d = *f - mu;
                d * d * *p
            }),
            h,
        );
        var.max(T::zero()).sqrt()
    }

    /// Differential entropy `-∫ p ln p` in nats; zero-density nodes contribute nothing.
    pub fn entropy(&self) -> T {
        let h = self.spacing();
        -trapezoid(
            self.weights.iter().map(|p| {
                if *p > T::zero() {
                    *p * p.ln()
                } else {
                    T::zero()
                }
            }),
            h,
        )
    }

    /// Linear interpolation of the density at `f`; zero outside the interval.
    pub fn density_at(&self, f: T) -> T {
        if !self.interval.contains(f) {
            return T::zero();
        }
        let h = self.spacing();
        let n = self.nodes.len();
        let x = (f - self.interval.lo) / h;
        let k = x.floor().to_usize().unwrap_or(0).min(n - 2);
        let t = (x - T::from_usize_lossy(k)).max(T::zero()).min(T::one());
        self.weights[k] * (T::one() - t) + self.weights[k + 1] * t
    }
}

/// Constant density `1/width` over the interval.
pub fn uniform_prior<T: Real>(interval: FrequencyInterval<T>, grid_size: usize) -> Result<GridDistribution<T>> {
    check_grid_size(grid_size)?;
    GridDistribution::from_weights(interval, vec![T::one(); grid_size])
}

/// Gaussian density truncated to the interval and renormalized.
///
/// When `sigma` is so far below the grid spacing that every node underflows,
/// all mass goes to the node nearest `mu`.
pub fn gaussian_prior<T: Real>(
    mu: T,
    sigma: T,
    interval: FrequencyInterval<T>,
    grid_size: usize,
) -> Result<GridDistribution<T>> {
    check_grid_size(grid_size)?;
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::Precondition(format!("gaussian prior sigma must be > 0, got {sigma}")));
    }
    if !interval.contains(mu) {
        return Err(Error::Precondition(format!(
            "gaussian prior mean {mu} outside [{}, {}]",
            interval.lo, interval.hi
        )));
    }
    let two_var = T::lit(2.0) * sigma * sigma;
    let nodes = grid_nodes(&interval, grid_size);
    let weights: Vec<T> = nodes
        .iter()
        .map(|f| {
            let d = *f - mu;
            (-(d * d) / two_var).exp()
        })
        .collect();
    match GridDistribution::normalized(interval, nodes, weights) {
        Ok(dist) => Ok(dist),
        Err(Error::DegenerateUpdate { .. }) => {
            let h = interval.width() / T::from_usize_lossy(grid_size - 1);
            let k = ((mu - interval.lo) / h).round().to_usize().unwrap_or(0).min(grid_size - 1);
            let mut weights = vec![T::zero(); grid_size];
            weights[k] = T::one();
            GridDistribution::from_weights(interval, weights)
        }
        Err(e) => Err(e),
    }
}

/// Pointwise product of the prior with `likelihood_at`, renormalized on the same grid.
pub fn bayes_update<T: Real>(
    prior: &GridDistribution<T>,
    likelihood_at: impl Fn(T) -> T,
) -> Result<GridDistribution<T>> {
    let mut weights = Vec::with_capacity(prior.weights.len());
    for (f, p) in prior.nodes.iter().zip(&prior.weights) {
        let l = likelihood_at(*f);
        if !l.is_finite() || l < T::zero() {
            return Err(Error::Precondition(format!(
                "likelihood must be finite and non-negative, got {l} at {f} Hz"
            )));
        }
        weights.push(l * *p);
    }
    GridDistribution::normalized(prior.interval, prior.nodes.clone(), weights)
}

/// Linearly interpolates the density onto a new grid and renormalizes.
pub fn regrid<T: Real>(
    dist: &GridDistribution<T>,
    new_interval: FrequencyInterval<T>,
    grid_size: usize,
) -> Result<GridDistribution<T>> {
    check_grid_size(grid_size)?;
    if !dist.interval.overlaps(&new_interval) {
        return Err(Error::Regrid(format!(
            "target [{}, {}] disjoint from source [{}, {}]",
            new_interval.lo, new_interval.hi, dist.interval.lo, dist.interval.hi
        )));
    }
    let nodes = grid_nodes(&new_interval, grid_size);
    let weights = nodes.iter().map(|f| dist.density_at(*f)).collect();
    GridDistribution::normalized(new_interval, nodes, weights).map_err(|e| match e {
        Error::DegenerateUpdate { mass } => {
            Error::Regrid(format!("overlap carries no probability mass ({mass:e})"))
        }
        other => other,
    })
}
