//! Closed-form average-SNR model of the linearised limiter.
//!
//! The limiter input is modelled as a two-component Gaussian mixture:
//! signal plus thermal noise with weight `1 - eps`, and signal plus thermal
//! plus impulsive noise with weight `eps`. The magnitude axis is cut into
//! regions `[alpha_{k-1}, alpha_k)`, each served by a linear lowpass with
//! time constant `tau_k = (alpha_k/alpha0) tau0`. Residual powers come from
//! the response of those filters to square pulses.

use crate::error::{Error, Result};
use crate::special::{erfc, normal_cdf, q_function};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub epsilon: f64,
    pub sigma_s2: f64,
    pub sigma_w2: f64,
    pub sigma_i2: f64,
}

impl MixtureParams {
    pub fn new(epsilon: f64, sigma_s2: f64, sigma_w2: f64, sigma_i2: f64) -> Result<Self> {
        let m = Self { epsilon, sigma_s2, sigma_w2, sigma_i2 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("mixture weight {} not in [0, 1]", self.epsilon)));
        }
        for (v, name) in [(self.sigma_s2, "sigma_s2"), (self.sigma_w2, "sigma_w2"), (self.sigma_i2, "sigma_i2")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Variance of the impulse-free component, `sigma_s^2 + sigma_w^2`.
    pub fn sigma1_sq(&self) -> f64 {
        self.sigma_s2 + self.sigma_w2
    }

    /// Variance of the impulse-present component.
    pub fn sigma2_sq(&self) -> f64 {
        self.sigma_s2 + self.sigma_w2 + self.sigma_i2
    }

    /// Mixture density of the limiter input amplitude.
    pub fn pdf(&self, x: f64) -> f64 {
        (1.0 - self.epsilon) * gaussian_pdf(x, 0.0, self.sigma1_sq()) + self.epsilon * gaussian_pdf(x, 0.0, self.sigma2_sq())
    }
}

/// Normal density with mean `mu` and variance `var`.
pub fn gaussian_pdf(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationGrid {
    pub alpha0: f64,
    pub delta_alpha: f64,
    pub n: usize,
    pub kappa: f64,
    pub tau0_s: f64,
    /// Square-pulse duration for the signal and thermal-noise terms.
    pub dt_s: f64,
    /// Square-pulse duration for the impulsive term (the burst length).
    pub impulse_dt_s: f64,
}

impl QuantizationGrid {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.alpha0, "alpha0"),
            (self.delta_alpha, "delta_alpha"),
            (self.kappa, "kappa"),
            (self.tau0_s, "tau0_s"),
            (self.dt_s, "dt_s"),
            (self.impulse_dt_s, "impulse_dt_s"),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 + k as f64 * self.delta_alpha
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.alpha(k) / self.alpha0 * self.tau0_s
    }

    /// Smallest `n` whose top level exceeds `kappa * xmax`.
    pub fn levels_to_cover(alpha0: f64, delta_alpha: f64, kappa: f64, xmax: f64) -> usize {
        crate::andl::required_levels(alpha0, delta_alpha, kappa * xmax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub p_s: f64,
    pub p_w: f64,
    pub p_i: f64,
    /// `+inf` when both noise terms vanish.
    pub snr_avg: f64,
    pub ber_bound: f64,
}

impl PowerBreakdown {
    pub fn snr_avg_db(&self) -> f64 {
        10.0 * self.snr_avg.log10()
    }

    /// Divides the noise powers by `gain`, the ratio of the acquisition
    /// bandwidth to the signal bandwidth, for white noise that a receiver
    /// filter confines to the signal band. The bound follows the new SNR.
    pub fn referred_to_band(&self, gain: f64) -> PowerBreakdown {
        let p_w = self.p_w / gain;
        let p_i = self.p_i / gain;
        let snr_avg = self.snr_avg * gain;
        let ber_bound = if snr_avg.is_finite() { q_function((2.0 * snr_avg).sqrt()) } else { 0.0 };
        PowerBreakdown { p_s: self.p_s, p_w, p_i, snr_avg, ber_bound }
    }
}

/// Probability mass of `kappa |x|` in each region for `x ~ N(0, sigma^2)`:
/// `p_0 = 1 - erfc(alpha0 / (sqrt2 kappa sigma))` and
/// `p_k = erfc(alpha_{k-1}/...) - erfc(alpha_k/...)`. Mass above `alpha_n`
/// is not included.
pub fn region_probs(sigma: f64, grid: &QuantizationGrid) -> Vec<f64> {
    let mut p = vec![0.0; grid.n + 1];
    if sigma <= 0.0 {
        p[0] = 1.0;
        return p;
    }
    let arg = |k: usize| grid.alpha(k) / (SQRT_2 * grid.kappa * sigma);
    p[0] = 1.0 - erfc(arg(0));
    for (k, pk) in p.iter_mut().enumerate().skip(1) {
        *pk = erfc(arg(k - 1)) - erfc(arg(k));
    }
    p
}

/// Region probabilities with the tail beyond `alpha_n` folded into region `n`.
pub fn region_probs_clamped(sigma: f64, grid: &QuantizationGrid) -> Vec<f64> {
    let mut p = region_probs(sigma, grid);
    if sigma > 0.0 {
        p[grid.n] += erfc(grid.alpha(grid.n) / (SQRT_2 * grid.kappa * sigma));
    }
    p
}

/// Averaged time parameter `(1-eps) sum p_{k,1} tau_k + eps sum p_{k,2} tau_k`.
pub fn mean_tau(mix: &MixtureParams, grid: &QuantizationGrid) -> f64 {
    let p1 = region_probs(mix.sigma1_sq().sqrt(), grid);
    let p2 = region_probs(mix.sigma2_sq().sqrt(), grid);
    (0..=grid.n)
        .map(|k| ((1.0 - mix.epsilon) * p1[k] + mix.epsilon * p2[k]) * grid.tau(k))
        .sum()
}

/// `x - 3/2 + 2 e^{-x} - e^{-2x}/2`, accurate for small `x` where the
/// terms cancel to `x^3/3`.
fn step_bracket(x: f64) -> f64 {
    if x < 1.0 {
        // sum_{k>=3} (-1)^k (2 - 2^{k-1}) x^k / k!
        let mut sum = 0.0;
        let mut xk_over_fact = x * x / 2.0;
        let mut pow2 = 2.0; // 2^{k-1}
        for k in 3..40 {
            xk_over_fact *= x / k as f64;
            pow2 *= 2.0;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * (2.0 - pow2) * xk_over_fact;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x - 1.5 + 2.0 * (-x).exp() - 0.5 * (-2.0 * x).exp()
    }
}

/// Energy of a first-order lowpass response to a square pulse of height `a`
/// and duration `dt`: charging with time constant `tau`, then discharging
/// from `a0 = a (1 - e^{-dt/tau})` with `tau0`.
pub fn step_response_power(tau: f64, tau0: f64, a: f64, dt: f64) -> f64 {
    let x = dt / tau;
    let a0 = -a * (-x).exp_m1();
    a * a * tau * step_bracket(x) + a0 * a0 * tau0 / 2.0
}

/// Mean of `|X|` for `X ~ N(mu, sigma^2)`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.abs();
    }
    sigma * (2.0 / PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp() + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma))
}

/// Representative impulse amplitude of region `k`: `alpha0` for the linear
/// region, the region centre otherwise.
pub fn impulse_region_mean(grid: &QuantizationGrid, k: usize) -> Result<f64> {
    if k > grid.n {
        return Err(Error::Domain(format!("region {k} outside 0..={}", grid.n)));
    }
    Ok(if k == 0 { grid.alpha0 } else { grid.alpha0 + (2 * k - 1) as f64 * grid.delta_alpha / 2.0 })
}

/// Residual signal, thermal and impulsive powers, the average SNR and the
/// BPSK error bound `Q(sqrt(2 SNR))`.
pub fn residual_powers(mix: &MixtureParams, grid: &QuantizationGrid) -> Result<PowerBreakdown> {
    mix.validate()?;
    grid.validate()?;
    let p1 = region_probs_clamped(mix.sigma1_sq().sqrt(), grid);
    let p2 = region_probs_clamped(mix.sigma2_sq().sqrt(), grid);
    let eps = mix.epsilon;
    let mut filter_sum = 0.0;
    let mut p_i = 0.0;
    for k in 0..=grid.n {
        let tau = grid.tau(k);
        let ps_k = step_response_power(tau, grid.tau0_s, 1.0, grid.dt_s);
        filter_sum += ((1.0 - eps) * p1[k] + eps * p2[k]) * ps_k;
        let pi_k = step_response_power(tau, grid.tau0_s, 1.0, grid.impulse_dt_s);
        p_i += impulse_region_mean(grid, k)?.powi(2) * p2[k] * pi_k;
    }
    p_i *= eps;
    let p_s = folded_normal_mean(0.0, mix.sigma_s2.sqrt()).powi(2) * filter_sum;
    let p_w = folded_normal_mean(0.0, mix.sigma_w2.sqrt()).powi(2) * filter_sum;
    let noise = p_w + p_i;
    let snr_avg = if noise > 0.0 { p_s / noise } else { f64::INFINITY };
    let ber_bound = if snr_avg.is_finite() { q_function((2.0 * snr_avg).sqrt()) } else { 0.0 };
    Ok(PowerBreakdown { p_s, p_w, p_i, snr_avg, ber_bound })
}
