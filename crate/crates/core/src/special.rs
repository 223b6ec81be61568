//! Error-function family in double precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Below this argument `erfcx` is `erfc(x)·exp(x²)` directly; above it the
/// continued fraction converges in a few dozen terms.
const CF_CUTOFF: f64 = 5.0;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x²) erfc(x)`, finite for all
/// `x > −26.5` and decaying like `1/(x√π)` for large `x`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < CF_CUTOFF {
        return libm::erfc(x) * (x * x).exp();
    }
    if x.is_infinite() {
        return 0.0;
    }
    // modified Lentz on x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))
    let tiny = 1e-300;
    let mut f = x;
    let mut cc = f;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        cc = x + a / cc;
        if cc.abs() < tiny {
            cc = tiny;
        }
        d = 1.0 / d;
        let delta = cc * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (PI.sqrt() * f)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 − Φ(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}
