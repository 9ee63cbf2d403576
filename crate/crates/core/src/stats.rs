//! Moment summaries and resampling error bars.

use std::fmt;

use crate::error::{QfptError, Result};
use crate::linalg::{pairwise_sum, pairwise_sum_c, C64};

/// Analytic variances this close to zero (relative to the second moment) are
/// roundoff and get clipped.
pub const VARIANCE_CLIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Analytic,
    MonteCarlo,
}

impl fmt::Display for MomentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::MonteCarlo => "monte-carlo",
        })
    }
}

/// Mean and variance of a first-passage observable.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentResult {
    pub mean: f64,
    pub variance: f64,
    pub method: MomentMethod,
    /// Standard error of `mean` (Monte Carlo only).
    pub stderr_mean: Option<f64>,
    /// Standard error of `variance` (Monte Carlo only).
    pub stderr_variance: Option<f64>,
    pub n_samples: Option<usize>,
}

impl MomentResult {
    pub fn analytic(mean: f64, second_moment: f64) -> Result<Self> {
        let raw = second_moment - mean * mean;
        let tol = VARIANCE_CLIP_TOL * second_moment.abs().max(1.0);
        let variance = if raw < 0.0 {
            if raw < -tol {
                return Err(QfptError::NegativeVariance { variance: raw });
            }
            0.0
        } else {
            raw
        };
        Ok(Self {
            mean,
            variance,
            method: MomentMethod::Analytic,
            stderr_mean: None,
            stderr_variance: None,
            n_samples: None,
        })
    }

    /// Sample mean, unbiased sample variance and their standard errors.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(QfptError::TooFewSamples(n));
        }
        let nf = n as f64;
        let mean = pairwise_sum(samples) / nf;
        let centered: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let m2 = pairwise_sum(&centered);
        let variance = m2 / (nf - 1.0);
        let fourth: Vec<f64> = samples.iter().map(|x| (x - mean).powi(4)).collect();
        let m4 = pairwise_sum(&fourth) / nf;
        let pop_var = m2 / nf;
        let stderr_variance = ((m4 - pop_var * pop_var).max(0.0) / nf).sqrt();
        Ok(Self {
            mean,
            variance,
            method: MomentMethod::MonteCarlo,
            stderr_mean: Some((variance / nf).sqrt()),
            stderr_variance: Some(stderr_variance),
            n_samples: Some(n),
        })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `variance / mean²`.
    pub fn precision(&self) -> f64 {
        self.variance / (self.mean * self.mean)
    }
}

/// Point estimate with a standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn within_sigma(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    pairwise_sum(samples) / samples.len() as f64
}

pub fn mean_c(samples: &[C64]) -> C64 {
    pairwise_sum_c(samples) / samples.len() as f64
}

/// Jackknife estimate of `f(mean(samples))` and its standard error.
///
/// Leave-one-out means are formed in O(n) from the full sum.
pub fn jackknife_of_mean<T, F>(samples: &[T], total: T, f: F) -> Result<Estimate>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Div<f64, Output = T>,
    F: Fn(T) -> f64,
{
    let n = samples.len();
    if n < 2 {
        return Err(QfptError::TooFewSamples(n));
    }
    let nf = n as f64;
    let value = f(total / nf);
    let loo: Vec<f64> = samples
        .iter()
        .map(|&x| f((total - x) / (nf - 1.0)))
        .collect();
    let loo_mean = pairwise_sum(&loo) / nf;
    let dev: Vec<f64> = loo.iter().map(|v| (v - loo_mean).powi(2)).collect();
    let var = (nf - 1.0) / nf * pairwise_sum(&dev);
    Ok(Estimate {
        value,
        stderr: var.sqrt(),
    })
}

pub fn jackknife_mean(samples: &[f64]) -> Result<Estimate> {
    jackknife_of_mean(samples, pairwise_sum(samples), |m| m)
}
