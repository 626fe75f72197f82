//! Standard normal helpers: the probit link and its logarithm.

use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::{PI, SQRT_2};

/// Below this argument `log_cdf` switches to the Mills-ratio continued fraction.
pub const LOG_TAIL_THRESHOLD: f64 = -8.0;

const CONTINUED_FRACTION_DEPTH: usize = 80;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cumulative distribution (the probit link).
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `log Φ(x)` without underflow in the lower tail.
pub fn log_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < LOG_TAIL_THRESHOLD {
        // Φ(x) = φ(x)·R(-x), R the Mills ratio.
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills_ratio(-x).ln()
    } else if x > 0.0 {
        (-cdf(-x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// Mills ratio `(1 - Φ(t)) / φ(t)` for large positive `t`, by the
/// continued fraction `1/(t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio(t: f64) -> f64 {
    let mut tail = t;
    for k in (1..=CONTINUED_FRACTION_DEPTH).rev() {
        tail = t + k as f64 / tail;
    }
    1.0 / tail
}

/// Inverse of the standard normal CDF: statrs' rational approximation
/// polished by one Newton step against [`cdf`].
pub fn inverse_cdf(p: f64) -> f64 {
    let x = Normal::standard().inverse_cdf(p);
    if !x.is_finite() {
        return x;
    }
    let step = if p > 0.5 {
        (cdf(-x) - (1.0 - p)) / pdf(x)
    } else {
        (p - cdf(x)) / pdf(x)
    };
    x + step
}
