//! Reference numerics shared by the integration tests. Everything here is
//! written independently of the library so it can serve as an oracle.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let s: f64 = rule.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * s;
    }
    total
}

/// `erf` by quadrature of `2/sqrt(pi) e^{-t^2}`.
pub fn erf_ref(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    if x == 0.0 {
        return 0.0;
    }
    s * 2.0 / PI.sqrt() * integrate(|t| (-t * t).exp(), 0.0, x, 64)
}

/// `erfc` for `x >= 0` by quadrature over `[x, x + 12]`, accurate in the
/// relative sense far into the tail.
pub fn erfc_ref(x: f64) -> f64 {
    assert!(x >= 0.0);
    2.0 / PI.sqrt() * integrate(|t| (-t * t).exp(), x, x + 12.0, 256)
}

/// `erfc` for large `x` by the Lentz continued fraction.
pub fn erfc_cf(x: f64) -> f64 {
    // erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() / f
}

/// Root of `erf_ref(x) = y` by bisection.
pub fn erf_inv_bisect(y: f64) -> f64 {
    let (mut lo, mut hi) = (-6.0, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erf_ref(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF from the quadrature reference.
pub fn normal_cdf_ref(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - 0.5 * erfc_ref(x / 2f64.sqrt())
    } else {
        0.5 * erfc_ref(-x / 2f64.sqrt())
    }
}

/// Energy of a first-order lowpass driven by a square pulse, by direct
/// quadrature of the two-piece response: charging `a(1 - e^{-t/tau})` on
/// `[0, dt]`, then the tail `a0 e^{-t/tau0}`.
pub fn step_power_quadrature(tau: f64, tau0: f64, a: f64, dt: f64) -> f64 {
    let charge = |t: f64| {
        let y = -a * (-t / tau).exp_m1();
        y * y
    };
    // concentrate panels where the charging curve bends
    let knee = (5.0 * tau).min(dt);
    let first = integrate(charge, 0.0, knee, 200);
    let second = if knee < dt { integrate(charge, knee, dt, 200) } else { 0.0 };
    let a0 = -a * (-dt / tau).exp_m1();
    let tail = integrate(|t| (a0 * (-t / tau0).exp()).powi(2), 0.0, 40.0 * tau0, 400);
    first + second + tail
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value for statistic `d` at sample size `n`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Horizontal position (dB) where a BER curve crosses `target`, by linear
/// interpolation of log10(BER) between the bracketing grid points.
/// Points with zero errors can close a bracket but are not interpolated.
pub fn crossing_db(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    for w in curve.windows(2) {
        let (x0, b0) = w[0];
        let (x1, b1) = w[1];
        if b0 >= target && b1 < target {
            if b1 <= 0.0 {
                return None;
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            return Some(x0 + (x1 - x0) * (l0 - lt) / (l0 - l1));
        }
    }
    None
}
