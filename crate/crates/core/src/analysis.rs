//! Allan deviation, log-log fits and dB comparisons.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_SERIES_LEN: usize = 4;

/// One-sigma tail probability on either side of a normal distribution.
const ONE_SIGMA_TAIL: f64 = 0.158_655_253_931_457_05;

/// Fractional frequency samples `y_k` taken every `tau0` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSeries<T> {
    samples: Vec<T>,
    tau0: T,
}

impl<T: Real> FractionalSeries<T> {
    pub fn new(samples: Vec<T>, tau0: T) -> Result<Self> {
        if !(tau0 > T::zero()) || !tau0.is_finite() {
            return Err(Error::Precondition(format!("sample interval must be positive, got {tau0}")));
        }
        if samples.len() < MIN_SERIES_LEN {
            return Err(Error::Precondition(format!(
                "series needs at least {MIN_SERIES_LEN} samples, got {}",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|y| !y.is_finite()) {
            return Err(Error::Precondition(format!("sample {k} is not finite")));
        }
        Ok(Self { samples, tau0 })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn tau0(&self) -> T {
        self.tau0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time error `x_k = τ₀ Σ_{i<k} y_i`, one longer than the series.
    pub fn phase(&self) -> Vec<T> {
        let mut x = Vec::with_capacity(self.samples.len() + 1);
        let mut acc = T::zero();
        x.push(acc);
        for y in &self.samples {
            acc = acc + *y * self.tau0;
            x.push(acc);
        }
        x
    }

    /// Largest usable averaging factor.
    pub fn max_factor(&self) -> usize {
        self.samples.len() / 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllanPoint<T> {
    pub tau: T,
    pub adev: T,
    /// Averaging factor `m = τ/τ₀`.
    pub factor: usize,
    /// Equivalent degrees of freedom assuming white FM.
    pub edf: T,
    /// One-sigma chi-squared confidence bounds.
    pub lower: T,
    pub upper: T,
}

/// Overlapping Allan deviation at each requested `τ`. Points that are not a
/// multiple of `τ₀`, or exceed a third of the record, come back as errors
/// without affecting the others.
pub fn allan_deviation<T: Real>(series: &FractionalSeries<T>, taus: &[T]) -> Vec<Result<AllanPoint<T>>> {
    // Referencing to the first sample leaves the estimator unchanged and keeps
    // a constant series exactly at zero.
    let y0 = series.samples[0];
    let mut x = Vec::with_capacity(series.len() + 1);
    let mut acc = T::zero();
    x.push(acc);
    for y in &series.samples {
        acc = acc + (*y - y0) * series.tau0;
        x.push(acc);
    }
    taus.iter().map(|tau| allan_point(series, &x, *tau)).collect()
}

fn allan_point<T: Real>(series: &FractionalSeries<T>, x: &[T], tau: T) -> Result<AllanPoint<T>> {
    let invalid = |reason: String| Error::InvalidTau {
        tau: tau.as_f64(),
        reason,
    };
    if !(tau > T::zero()) {
        return Err(invalid("must be positive".into()));
    }
    let ratio = tau / series.tau0;
    let m = ratio.round();
    if (ratio - m).abs() > T::lit(1e-9) * ratio.max(T::one()) || m < T::one() {
        return Err(invalid(format!("not an integer multiple of tau0 = {}", series.tau0)));
    }
    let m = m.to_usize().unwrap_or(usize::MAX);
    if m > series.max_factor() {
        return Err(invalid(format!(
            "averaging factor {m} exceeds a third of the {} samples",
            series.len()
        )));
    }
    let n = x.len();
    let terms = n - 2 * m;
    let sum = (0..terms)
        .map(|k| {
            let d = x[k + 2 * m] - T::lit(2.0) * x[k + m] + x[k];
            d * d
        })
        .fold(T::zero(), |a, b| a + b);
    let tau_m = series.tau0 * T::from_usize_lossy(m);
    let adev = (sum / (T::lit(2.0) * T::from_usize_lossy(terms) * tau_m * tau_m)).sqrt();
    let edf = white_fm_edf(n, m);
    let (lower, upper) = chi_squared_bounds(adev.as_f64(), edf);
    Ok(AllanPoint {
        tau: tau_m,
        adev,
        factor: m,
        edf: T::lit(edf),
        lower: T::lit(lower),
        upper: T::lit(upper),
    })
}

/// Equivalent degrees of freedom of the overlapping estimator under white FM,
/// for `n` phase points and averaging factor `m`.
pub fn white_fm_edf(n: usize, m: usize) -> f64 {
    let n = n as f64;
    let m = m as f64;
    let edf = (3.0 * (n - 1.0) / (2.0 * m) - 2.0 * (n - 2.0) / n) * 4.0 * m * m / (4.0 * m * m + 5.0);
    edf.max(1.0)
}

fn chi_squared_bounds(adev: f64, edf: f64) -> (f64, f64) {
    match ChiSquared::new(edf) {
        Ok(chi) => {
            let hi_q = chi.inverse_cdf(1.0 - ONE_SIGMA_TAIL);
            let lo_q = chi.inverse_cdf(ONE_SIGMA_TAIL);
            (adev * (edf / hi_q).sqrt(), adev * (edf / lo_q).sqrt())
        }
        Err(_) => (adev, adev),
    }
}

/// Octave-spaced `τ₀·2^k` up to a third of the record length.
pub fn octave_taus<T: Real>(series: &FractionalSeries<T>) -> Vec<T> {
    let max = series.max_factor();
    std::iter::successors(Some(1usize), |m| m.checked_mul(2))
        .take_while(|m| *m <= max)
        .map(|m| series.tau0 * T::from_usize_lossy(m))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit<T> {
    pub slope: T,
    /// Natural-log intercept: `ln y ≈ intercept + slope·ln x`.
    pub intercept: T,
    /// RMS residual in natural-log units.
    pub residual: T,
}

impl<T: Real> LogLogFit<T> {
    pub fn predict(&self, x: T) -> T {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

fn log_points<T: Real>(points: &[(T, T)]) -> Result<Vec<(T, T)>> {
    points
        .iter()
        .map(|(x, y)| {
            if *x > T::zero() && *y > T::zero() && x.is_finite() && y.is_finite() {
                Ok((x.ln(), y.ln()))
            } else {
                Err(Error::Precondition(format!("log-log fit needs positive values, got ({x}, {y})")))
            }
        })
        .collect()
}

/// Least-squares line through `(ln x, ln y)` over `points[window]`.
pub fn fit_loglog_slope<T: Real>(points: &[(T, T)], window: Range<usize>) -> Result<LogLogFit<T>> {
    let slice = points
        .get(window.clone())
        .ok_or_else(|| Error::Precondition(format!("window {window:?} out of range for {} points", points.len())))?;
    if slice.len() < 3 {
        return Err(Error::Precondition(format!("fit needs at least 3 points, got {}", slice.len())));
    }
    let logs = log_points(slice)?;
    let n = T::from_usize_lossy(logs.len());
    let mx = logs.iter().map(|p| p.0).sum::<T>() / n;
    let my = logs.iter().map(|p| p.1).sum::<T>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    if !(sxx > T::zero()) {
        return Err(Error::Precondition("fit needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = logs
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum::<T>();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Coefficient `c` of `c/√τ` fitted in log space with the slope pinned.
pub fn fit_white_fm_coefficient<T: Real>(points: &[(T, T)]) -> Result<T> {
    if points.is_empty() {
        return Err(Error::Precondition("coefficient fit needs at least one point".into()));
    }
    let logs = log_points(points)?;
    let half = T::lit(0.5);
    let mean = logs.iter().map(|(lx, ly)| *ly + half * *lx).sum::<T>() / T::from_usize_lossy(logs.len());
    Ok(mean.exp())
}

/// Stability coefficient of `series` from the octave points whose factor lies
/// in `factors`; invalid points are skipped.
pub fn stability_coefficient<T: Real>(series: &FractionalSeries<T>, factors: Range<usize>) -> Result<T> {
    let points: Vec<(T, T)> = allan_deviation(series, &octave_taus(series))
        .into_iter()
        .flatten()
        .filter(|p| factors.contains(&p.factor))
        .map(|p| (p.tau, p.adev))
        .collect();
    fit_white_fm_coefficient(&points)
}

/// `10·log10(sigma_a / sigma_b)`: positive when `b` is the more stable.
pub fn improvement_db<T: Real>(sigma_a: T, sigma_b: T) -> Result<T> {
    if !(sigma_a > T::zero() && sigma_b > T::zero()) {
        return Err(Error::Precondition(format!(
            "stability coefficients must be positive, got {sigma_a} and {sigma_b}"
        )));
    }
    Ok(T::lit(10.0) * (sigma_a / sigma_b).log10())
}

/// White-FM fractional samples with Allan deviation `sigma_1s/√τ`.
pub fn white_fm_samples<T: Real, R: Rng + ?Sized>(sigma_1s: T, tau0: T, n: usize, rng: &mut R) -> Vec<T> {
    let sd = sigma_1s / tau0.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * T::lit(z)
        })
        .collect()
}
