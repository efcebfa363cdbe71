//! Error-function family and the Gaussian tail function.
//!
//! `erf`/`erfc` come from `libm` (a port of the FreeBSD msun routines,
//! accurate to about one ulp). The inverse is computed here: a rational
//! starting guess followed by Halley refinement against `erf`/`erfc`.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x) = erfc(x/sqrt 2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Inverse error function on the open interval (-1, 1).
pub fn erf_inv(y: f64) -> Result<f64> {
    if !(y > -1.0 && y < 1.0) {
        return Err(Error::Domain(format!("erf_inv argument {y} not in (-1, 1)")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let sign = y.signum();
    let a = y.abs();
    let mut x = initial_guess(a);
    // Near |y| = 1 the residual is formed through erfc to avoid cancellation.
    let tail = 1.0 - a;
    for _ in 0..4 {
        let f = if a > 0.5 { tail - erfc(x) } else { erf(x) - a };
        let fp = FRAC_2_SQRT_PI * (-x * x).exp();
        if fp == 0.0 {
            break;
        }
        let u = f / fp;
        let step = u / (1.0 + x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    Ok(sign * x)
}

/// Starting point for the Halley iteration (Giles' single-precision fit).
fn initial_guess(a: f64) -> f64 {
    let w = -((1.0 - a) * (1.0 + a)).ln();
    if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        p = 1.501_409_41 + p * w;
        p * a
    } else {
        let w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        p = 2.832_976_82 + p * w;
        p * a
    }
}
