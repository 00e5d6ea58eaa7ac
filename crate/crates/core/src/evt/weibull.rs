//! Two-parameter Weibull distribution: maximum-likelihood fit and CDF.

use crate::error::{OsrError, Result};

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;
const BRACKET: (f64, f64) = (1e-3, 1e3);

/// `pi / sqrt(6)`: ratio between the std-dev of `ln X` and `1 / shape`.
const LOG_SD_FACTOR: f64 = 1.282_549_830_161_864;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullFit {
    pub alpha: f64,
    pub gamma: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// `P(X <= s) = 1 - exp(-(s / alpha)^gamma)` for `s > 0`, else 0.
///
/// The result is clamped below 1 so it always lies in `[0, 1)`.
pub fn weibull_cdf(s: f64, alpha: f64, gamma: f64) -> f64 {
    if s.is_nan() || s <= 0.0 {
        return 0.0;
    }
    let t = (s / alpha).powf(gamma);
    (-(-t).exp_m1()).min(1.0 - f64::EPSILON / 2.0)
}

/// Density `(gamma / x) (x / alpha)^gamma exp(-(x / alpha)^gamma)` for `x >= 0`.
pub fn weibull_pdf(x: f64, alpha: f64, gamma: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if gamma < 1.0 {
            f64::INFINITY
        } else if gamma == 1.0 {
            1.0 / alpha
        } else {
            0.0
        };
    }
    let z = x / alpha;
    let t = z.powf(gamma);
    gamma / x * t * (-t).exp()
}

pub fn log_likelihood(samples: &[f64], alpha: f64, gamma: f64) -> f64 {
    let n = samples.len() as f64;
    let sum_ln: f64 = samples.iter().map(|x| x.ln()).sum();
    let sum_pow: f64 = samples.iter().map(|x| (x / alpha).powf(gamma)).sum();
    n * gamma.ln() - n * gamma * alpha.ln() + (gamma - 1.0) * sum_ln - sum_pow
}

/// Profile-likelihood score for the shape on samples scaled so the largest is
/// 1 (`ln_y <= 0`), together with its derivative and `mean(y^gamma)`.
fn shape_score(ln_y: &[f64], mean_ln_y: f64, gamma: f64) -> (f64, f64, f64) {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &l in ln_y {
        let w = (gamma * l).exp();
        s0 += w;
        s1 += w * l;
        s2 += w * l * l;
    }
    let a = s1 / s0;
    let f = a - 1.0 / gamma - mean_ln_y;
    let df = s2 / s0 - a * a + 1.0 / (gamma * gamma);
    (f, df, s0 / ln_y.len() as f64)
}

/// Maximum-likelihood `(alpha, gamma)` for positive samples.
///
/// The shape solves `sum x^g ln x / sum x^g - 1/g - mean(ln x) = 0`, found by
/// Newton's method started from the log-moment estimate and safeguarded by a
/// bisection bracket (initially `[1e-3, 1e3]`, widened if the root lies
/// outside). The scale follows as `mean(x^g)^(1/g)`.
pub fn fit_weibull(samples: &[f64]) -> Result<WeibullFit> {
    if samples.len() < 2 {
        return Err(OsrError::TooFewSamples(samples.len()));
    }
    if let Some(&bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(OsrError::NonPositiveSample(bad));
    }
    let max = samples.iter().copied().fold(f64::MIN, f64::max);
    let min = samples.iter().copied().fold(f64::MAX, f64::min);
    if min == max {
        return Err(OsrError::DegenerateSample);
    }
    let ln_y: Vec<f64> = samples.iter().map(|x| (x / max).ln()).collect();
    let n = ln_y.len() as f64;
    let mean = ln_y.iter().sum::<f64>() / n;
    let var = ln_y.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;

    let score = |g: f64| shape_score(&ln_y, mean, g).0;
    let (mut lo, mut hi) = BRACKET;
    while score(lo) > 0.0 && lo > 1e-12 {
        lo /= 10.0;
    }
    while score(hi) < 0.0 && hi < 1e12 {
        hi *= 10.0;
    }

    let mut gamma = if var > 0.0 {
        (LOG_SD_FACTOR / var.sqrt()).clamp(lo, hi)
    } else {
        1.0
    };
    let mut iterations = 0;
    let mut scale_pow = 1.0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let (f, df, m) = shape_score(&ln_y, mean, gamma);
        scale_pow = m;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
        let mut next = gamma - f / df;
        if !(next.is_finite() && next > lo && next < hi) {
            next = (lo * hi).sqrt();
        }
        let step = (next - gamma).abs();
        gamma = next;
        if step <= TOLERANCE * gamma.max(1.0) {
            scale_pow = shape_score(&ln_y, mean, gamma).2;
            break;
        }
    }
    let alpha = max * scale_pow.powf(1.0 / gamma);
    Ok(WeibullFit {
        alpha,
        gamma,
        log_likelihood: log_likelihood(samples, alpha, gamma),
        iterations,
    })
}
