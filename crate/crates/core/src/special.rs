//! Normal distribution helpers built on the FreeBSD-derived `erfc` in `libm`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `P(Z > x)`, accurate to full relative precision for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `∫_a^b exp(-x²/2) dx`, evaluated on whichever tail avoids cancellation.
pub fn gauss_integral(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let mass = if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_sf(b) - normal_cdf(a)
    };
    SQRT_2PI * mass
}

pub fn normal_pdf_scaled(x: f64, variance: f64) -> f64 {
    (-0.5 * x * x / variance).exp() / (2.0 * PI * variance).sqrt()
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Density of `Gamma(shape, 1)` at `x`.
pub fn gamma_pdf(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp()
}

/// Binomial coefficient `C(2m, m) 4^{-m}`, the probability that a symmetric
/// continuous walk stays positive for `m` steps.
pub fn central_binomial_ratio(m: usize) -> f64 {
    let mut p = 1.0;
    for j in 1..=m {
        p *= (2 * j - 1) as f64 / (2 * j) as f64;
    }
    p
}
