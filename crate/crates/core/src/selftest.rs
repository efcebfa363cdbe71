//! Fast invariant checks run by the `selftest` command.

use crate::analytic::{residual_powers, MixtureParams, QuantizationGrid};
use crate::andl::{andl_exact, linear_lowpass, AndlConfig, AndlMode, ResolutionState};
use crate::baseline::{blank, clip};
use crate::error::Result;
use crate::noise::{gen_awgn, ThermalNoiseSpec};
use crate::signal::{ComplexEnvelope, C64};
use crate::sim::{run_methods, write_results, Mitigation, OutputFormat, SimScenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn noise(n: usize, rate: f64, var: f64, seed: u64) -> Result<ComplexEnvelope> {
    gen_awgn(&ThermalNoiseSpec::new(var)?, n, rate, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Output steps of the exact limiter on a large step stay within `alpha dt / tau0`.
pub fn slew_rate_bound() -> Result<Check> {
    let rate = 12.8e6;
    let cfg = AndlConfig::for_bandwidth(1e5, AndlMode::Exact);
    let alpha = 0.5;
    let mut x = noise(20_000, rate, 0.01, 1)?.into_samples();
    x.iter_mut().skip(5_000).for_each(|z| *z += C64::new(40.0, -25.0));
    let x = ComplexEnvelope::new(rate, x)?;
    let y = andl_exact(&x, &cfg, &ResolutionState::fixed(alpha))?;
    let limit = alpha / (rate * cfg.tau0_s);
    let worst = y.samples().windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
    Ok(check("slew_rate_bound", worst <= limit * (1.0 + 1e-12), format!("max step {worst:.6e}, bound {limit:.6e}")))
}

/// With an unreachable resolution parameter the limiter is the linear lowpass.
pub fn alpha_infinity_is_lowpass() -> Result<Check> {
    let rate = 12.8e6;
    let cfg = AndlConfig::for_bandwidth(1e5, AndlMode::Exact);
    let x = noise(50_000, rate, 4.0, 2)?;
    let a = andl_exact(&x, &cfg, &ResolutionState::fixed(1e300))?;
    let b = linear_lowpass(&x, cfg.tau0_s)?;
    let err = a.samples().iter().zip(b.samples()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    Ok(check("alpha_infinity_is_lowpass", err <= 1e-9, format!("max deviation {err:.3e}")))
}

pub fn threshold_idempotence() -> Result<Check> {
    let x = noise(10_000, 1.0, 9.0, 3)?;
    let mut ok = true;
    for t in [0.0, 0.5, 2.0, 7.5] {
        let b = blank(&x, t)?;
        let c = clip(&x, t)?;
        ok &= blank(&b, t)?.samples() == b.samples();
        // re-clipping may move a sample by rounding of the rescale only
        ok &= clip(&c, t)?.samples().iter().zip(c.samples()).all(|(p, q)| (p - q).norm() <= 1e-12 * t.max(1.0));
        ok &= c.samples().iter().all(|z| z.norm() <= t * (1.0 + 1e-15));
    }
    Ok(check("blank_clip_idempotent", ok, "thresholds 0, 0.5, 2, 7.5".into()))
}

/// Two runs of the same small scenario give byte-identical CSV.
pub fn determinism() -> Result<Check> {
    let s = SimScenario::awgn(6.0, Mitigation::AndlExact, 6, 99).with_impulses(0.0, 2e5, 1e-6);
    let methods = [Mitigation::None, Mitigation::AndlExact, Mitigation::Clipping];
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_results(&run_methods(&s, &methods)?, OutputFormat::Csv, &mut a)?;
    write_results(&run_methods(&s, &methods)?, OutputFormat::Csv, &mut b)?;
    Ok(check("determinism", a == b, format!("{} bytes", a.len())))
}

/// Analytic SNR never improves as the burst power grows.
pub fn snr_monotone_in_impulse_power() -> Result<Check> {
    let grid = |alpha0: f64| QuantizationGrid {
        alpha0,
        delta_alpha: 0.2,
        n: 400,
        kappa: 1.0,
        tau0_s: 1.0 / (4.0 * std::f64::consts::PI * 1e5),
        dt_s: 4e-6,
        impulse_dt_s: 1e-6,
    };
    let mut worst_rise = f64::NEG_INFINITY;
    let mut last = f64::INFINITY;
    for i in 0..60 {
        let sigma_i2 = 0.25 * 1.15f64.powi(i);
        let mix = MixtureParams::new(0.2, 1.0, 16.0, sigma_i2)?;
        let alpha0 = crate::andl::alpha_from_sigma(mix.sigma1_sq().sqrt(), 4.68e-3)?;
        let snr = residual_powers(&mix, &grid(alpha0))?.snr_avg;
        worst_rise = worst_rise.max(snr - last);
        last = snr;
    }
    Ok(check("snr_avg_nonincreasing_in_sigma_i2", worst_rise <= 0.0, format!("largest step {worst_rise:.3e}")))
}

pub fn run_all() -> Result<Vec<Check>> {
    Ok(vec![
        slew_rate_bound()?,
        alpha_infinity_is_lowpass()?,
        threshold_idempotence()?,
        determinism()?,
        snr_monotone_in_impulse_power()?,
    ])
}
