mod common;

use andl::analytic::{
    folded_normal_mean, impulse_region_mean, mean_tau, region_probs, residual_powers, step_response_power,
    MixtureParams, QuantizationGrid,
};
use andl::special::{erf, erf_inv, erfc, q_function};
use common::*;
use proptest::prelude::*;
use std::f64::consts::SQRT_2;

fn grid(alpha0: f64, delta_alpha: f64, n: usize) -> QuantizationGrid {
    QuantizationGrid { alpha0, delta_alpha, n, kappa: 1.0, tau0_s: 7.9577e-7, dt_s: 4e-6, impulse_dt_s: 1e-6 }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn step_power_matches_quadrature_over_three_decades() {
    let axis: Vec<f64> = (0..7).map(|i| 1e-8 * 10f64.powf(i as f64 * 0.5)).collect();
    let mut worst = 0.0f64;
    for &tau in &axis {
        for &tau0 in &axis {
            for &dt in &axis {
                let closed = step_response_power(tau, tau0, 1.3, dt);
                let quad = step_power_quadrature(tau, tau0, 1.3, dt);
                worst = worst.max(rel(closed, quad));
            }
        }
    }
    assert!(worst < 1e-9, "worst relative error {worst:e}");
}

#[test]
fn step_power_reference_point() {
    let tau0 = 7.9577e-7;
    let closed = step_response_power(tau0, tau0, 1.0, 5.0 * tau0);
    let quad = step_power_quadrature(tau0, tau0, 1.0, 5.0 * tau0);
    assert!(rel(closed, quad) < 1e-9, "{closed} vs {quad}");
}

#[test]
fn step_power_limits() {
    let (tau0, dt) = (7.9577e-7, 4e-6);
    let v = step_response_power(dt * 1e-6, tau0, 2.0, dt);
    assert!(rel(v, 4.0 * (dt + tau0 / 2.0)) < 1e-5);
    assert_eq!(step_response_power(1e-6, tau0, 0.0, dt), 0.0);
}

#[test]
fn erf_and_erfc_match_quadrature() {
    for i in 0..=160 {
        let x = -8.0 + i as f64 * 0.1;
        assert!((erf(x) - erf_ref(x)).abs() <= 1e-12, "erf({x})");
    }
    for i in 0..=80 {
        let x = i as f64 * 0.1;
        assert!(rel(erfc(x), erfc_ref(x)) <= 1e-12, "erfc({x}) {} vs {}", erfc(x), erfc_ref(x));
    }
}

#[test]
fn erfc_tail_matches_continued_fraction() {
    for x in [3.0, 4.0, 5.5, 8.0, 12.0, 20.0] {
        assert!(rel(erfc(x), erfc_cf(x)) <= 1e-12, "erfc({x})");
    }
}

#[test]
fn erf_inv_matches_bisection() {
    for i in -99..=99 {
        let y = i as f64 * 0.01 * 0.999 / 0.99;
        let x = erf_inv(y).unwrap();
        assert!((x - erf_inv_bisect(y)).abs() <= 1e-12, "erf_inv({y})");
    }
    assert!((erf_inv(0.99532).unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn q_function_values() {
    assert_eq!(q_function(0.0), 0.5);
    let q = q_function(20f64.sqrt());
    assert!((q - 3.872e-6).abs() < 5e-9, "{q}");
    assert!((q - 0.5 * erfc_ref(20f64.sqrt() / SQRT_2)).abs() / q < 1e-12);
    assert!((q_function(SQRT_2) - 0.5 * erfc_ref(1.0)).abs() < 1e-15);
}

#[test]
fn folded_normal_matches_numeric_integration() {
    for (mu, sigma) in [(0.0, 1.0), (0.0, 2.0), (3.0, 1.0), (-1.5, 0.7), (0.4, 2.5)] {
        let pdf = |x: f64| (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let lo = mu - 14.0 * sigma;
        let hi = mu + 14.0 * sigma;
        let r = integrate(|x| x.abs() * pdf(x), lo.min(0.0), 0.0, 200) + integrate(|x| x.abs() * pdf(x), 0.0, hi.max(0.0), 200);
        assert!((folded_normal_mean(mu, sigma) - r).abs() < 1e-11, "mu={mu} sigma={sigma}");
    }
    assert!((folded_normal_mean(0.0, 1.0) - 0.797_884_560_802_865_4).abs() < 1e-15);
    assert!((folded_normal_mean(0.0, 2.0) - 1.595_769_121_605_731).abs() < 1e-14);
}

#[test]
fn region_probs_reference_values() {
    let p = region_probs(1.0, &grid(1.0, 0.2, 2));
    assert!((p[0] - (2.0 * normal_cdf_ref(1.0) - 1.0)).abs() < 1e-12);
    assert!((p[0] - 0.682_689_492_137_086).abs() < 1e-12);
}

#[test]
fn impulse_region_means() {
    let g = grid(1.0, 0.2, 5);
    assert_eq!(impulse_region_mean(&g, 0).unwrap(), 1.0);
    assert!((impulse_region_mean(&g, 1).unwrap() - 1.1).abs() < 1e-15);
    assert!((impulse_region_mean(&g, 3).unwrap() - 1.5).abs() < 1e-15);
    assert!(impulse_region_mean(&g, 6).is_err());
}

#[test]
fn mean_tau_limits() {
    let g = grid(1e9, 0.2, 4);
    let m = MixtureParams::new(0.0, 1.0, 0.1, 0.0).unwrap();
    assert!(rel(mean_tau(&m, &g), g.tau0_s) < 1e-15);
    let g0 = grid(1.0, 0.2, 0);
    let m = MixtureParams::new(0.3, 1.0, 0.1, 4.0).unwrap();
    let p1 = region_probs(m.sigma1_sq().sqrt(), &g0)[0];
    let p2 = region_probs(m.sigma2_sq().sqrt(), &g0)[0];
    assert!(rel(mean_tau(&m, &g0), g0.tau0_s * (0.7 * p1 + 0.3 * p2)) < 1e-14);
}

#[test]
fn mean_tau_nondecreasing_in_impulse_power_and_weight() {
    let g = grid(2.0, 0.2, 200);
    let mut last = 0.0;
    for i in 0..60 {
        let m = MixtureParams::new(0.2, 1.0, 0.1, i as f64 * 0.5).unwrap();
        let t = mean_tau(&m, &g);
        assert!(t >= last * (1.0 - 1e-12));
        last = t;
    }
    let mut last = 0.0;
    for i in 0..=20 {
        let m = MixtureParams::new(i as f64 / 20.0, 1.0, 0.1, 10.0).unwrap();
        let t = mean_tau(&m, &g);
        assert!(t >= last * (1.0 - 1e-12));
        last = t;
    }
}

#[test]
fn snr_nonincreasing_in_impulse_power() {
    let g = grid(2.0, 0.2, 400);
    let mut last = f64::INFINITY;
    for i in 0..80 {
        let m = MixtureParams::new(0.2, 1.0, 0.1, i as f64 * 0.25).unwrap();
        let snr = residual_powers(&m, &g).unwrap().snr_avg;
        assert!(snr <= last * (1.0 + 1e-12), "step {i}: {snr} after {last}");
        last = snr;
    }
}

#[test]
fn impulse_free_snr_is_input_ratio() {
    let g = grid(2.0, 0.2, 50);
    let m = MixtureParams::new(0.0, 1.0, 0.25, 0.0).unwrap();
    let pb = residual_powers(&m, &g).unwrap();
    assert_eq!(pb.p_i, 0.0);
    assert!(rel(pb.snr_avg, 4.0) < 1e-12);
}

#[test]
fn bound_at_zero_db() {
    let g = grid(2.0, 0.2, 50);
    let m = MixtureParams::new(0.0, 1.0, 1.0, 0.0).unwrap();
    let pb = residual_powers(&m, &g).unwrap();
    assert!((pb.ber_bound - 0.078_649_603_525_142_6).abs() < 1e-12);
    let silent = MixtureParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
    let pb = residual_powers(&silent, &g).unwrap();
    assert!(pb.snr_avg.is_infinite());
    assert_eq!(pb.ber_bound, 0.0);
}

proptest! {
    #[test]
    fn region_probs_sum_to_one(sigma in 0.01f64..50.0, alpha0 in 0.01f64..20.0, da in 0.01f64..2.0, n in 0usize..300) {
        let g = grid(alpha0, da, n);
        let p = region_probs(sigma, &g);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let tail = erfc(g.alpha(n) / (SQRT_2 * sigma));
        let total: f64 = p.iter().sum::<f64>() + tail;
        prop_assert!((total - 1.0).abs() < 1e-12, "total {}", total);
    }

    #[test]
    fn bound_in_range_and_decreasing(sw in 0.01f64..10.0, k in 1.01f64..3.0) {
        let g = grid(2.0, 0.2, 100);
        let a = residual_powers(&MixtureParams::new(0.0, 1.0, sw * k, 0.0).unwrap(), &g).unwrap();
        let b = residual_powers(&MixtureParams::new(0.0, 1.0, sw, 0.0).unwrap(), &g).unwrap();
        prop_assert!(a.ber_bound > 0.0 && a.ber_bound <= 0.5);
        prop_assert!(b.snr_avg > a.snr_avg);
        prop_assert!(b.ber_bound <= a.ber_bound);
    }

    #[test]
    fn zero_weight_ignores_impulse_power(si in 0.0f64..100.0, sw in 0.01f64..5.0) {
        let g = grid(1.5, 0.2, 80);
        let base = residual_powers(&MixtureParams::new(0.0, 1.0, sw, 0.0).unwrap(), &g).unwrap();
        let other = residual_powers(&MixtureParams::new(0.0, 1.0, sw, si).unwrap(), &g).unwrap();
        prop_assert_eq!(other.p_i, 0.0);
        prop_assert_eq!(base, other);
    }

    #[test]
    fn powers_nonnegative(eps in 0.0f64..1.0, sw in 0.0f64..5.0, si in 0.0f64..50.0) {
        let g = grid(1.5, 0.2, 120);
        let pb = residual_powers(&MixtureParams::new(eps, 1.0, sw, si).unwrap(), &g).unwrap();
        prop_assert!(pb.p_s >= 0.0 && pb.p_w >= 0.0 && pb.p_i >= 0.0);
        prop_assert!(pb.ber_bound >= 0.0 && pb.ber_bound <= 0.5);
    }

    #[test]
    fn q_symmetry(x in -8.0f64..8.0) {
        prop_assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-14);
        prop_assert!((q_function(x) - 0.5 * erfc(x / SQRT_2)).abs() <= 1e-15);
    }

    #[test]
    fn erf_inv_round_trip(y in -0.999f64..0.999) {
        prop_assert!((erf(erf_inv(y).unwrap()) - y).abs() < 1e-10);
    }
}
