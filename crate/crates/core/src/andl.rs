//! Adaptive nonlinear differential limiter.
//!
//! The limiter integrates `dchi/dt = (x - chi) / tau` where the time
//! parameter is `tau0` while the driving magnitude stays inside the
//! resolution parameter `alpha` and grows proportionally outside it:
//!
//! * exact law: `tau = tau0 * max(1, |x - chi| / alpha)`, which caps the
//!   output slew rate at `alpha / tau0`;
//! * simplified law: `tau = tau0 * max(1, kappa |x| / alpha0)`;
//! * filter bank: the simplified law quantised onto a grid of linear
//!   filters `tau_k = (alpha_k / alpha0) tau0`.
//!
//! All forms use explicit Euler steps at the analog sampling interval with
//! `chi(0) = x(0)`, and carry complex state so the limiting is isotropic in
//! the I/Q plane.

use crate::error::{Error, Result};
use crate::signal::{ComplexEnvelope, C64};
use crate::special::erf_inv;
use serde::{Deserialize, Serialize};

/// Lower bound applied to auto-calibrated resolution parameters.
pub const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AndlMode {
    Exact,
    Simplified,
    FilterBank,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndlConfig {
    pub tau0_s: f64,
    pub zeta: f64,
    pub kappa: f64,
    pub delta_alpha: f64,
    /// Number of filter-bank levels above the linear one; `None` sizes the
    /// bank from the dynamic range of each record.
    pub n_levels: Option<usize>,
    pub mode: AndlMode,
}

impl AndlConfig {
    /// Defaults for a signal of bandwidth `bandwidth_hz`: `tau0 = 1/(4 pi B)`.
    pub fn for_bandwidth(bandwidth_hz: f64, mode: AndlMode) -> Self {
        Self {
            tau0_s: 1.0 / (4.0 * std::f64::consts::PI * bandwidth_hz),
            zeta: 4.68e-3,
            kappa: 1.0,
            delta_alpha: 0.2,
            n_levels: None,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.tau0_s, "tau0_s")?;
        positive(self.kappa, "kappa")?;
        positive(self.delta_alpha, "delta_alpha")?;
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!("zeta must lie in (0, 1), got {}", self.zeta)));
        }
        if self.n_levels == Some(0) {
            return Err(Error::Config("n_levels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Resolution parameter held for one OFDM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionState {
    pub alpha: f64,
    pub sigma_z: f64,
}

impl ResolutionState {
    pub fn fixed(alpha: f64) -> Self {
        Self { alpha, sigma_z: f64::NAN }
    }
}

/// Uniform grid of linear filters approximating the simplified law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub alphas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl FilterBank {
    pub fn n(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alpha0(&self) -> f64 {
        self.alphas[0]
    }

    pub fn delta_alpha(&self) -> f64 {
        if self.alphas.len() > 1 {
            self.alphas[1] - self.alphas[0]
        } else {
            0.0
        }
    }

    pub fn top(&self) -> f64 {
        *self.alphas.last().unwrap()
    }

    /// Region index for a driving magnitude `u`: 0 when `u <= alpha0`,
    /// otherwise the `k` with `alpha_{k-1} < u <= alpha_k`.
    pub fn region(&self, u: f64) -> Option<usize> {
        let a0 = self.alphas[0];
        if u <= a0 {
            return Some(0);
        }
        let n = self.n();
        if n == 0 || u > self.top() {
            return None;
        }
        let guess = (((u - a0) / self.delta_alpha()).ceil() as usize).clamp(1, n);
        // guard against rounding at the region edges
        let mut k = guess;
        while k > 1 && u <= self.alphas[k - 1] {
            k -= 1;
        }
        while k < n && u > self.alphas[k] {
            k += 1;
        }
        Some(k)
    }
}

/// Bank levels needed so that the top level strictly exceeds `xmax`.
pub fn required_levels(alpha0: f64, delta_alpha: f64, xmax: f64) -> usize {
    if xmax < alpha0 {
        return 0;
    }
    let mut n = ((xmax - alpha0) / delta_alpha).ceil().max(0.0) as usize;
    while alpha0 + n as f64 * delta_alpha <= xmax {
        n += 1;
    }
    n
}

pub fn build_filter_bank(alpha0: f64, delta_alpha: f64, n: usize, tau0: f64, xmax: f64) -> Result<FilterBank> {
    if !(alpha0 > 0.0 && delta_alpha > 0.0 && tau0 > 0.0) {
        return Err(Error::Config(format!(
            "filter bank needs alpha0, delta_alpha, tau0 > 0 (got {alpha0}, {delta_alpha}, {tau0})"
        )));
    }
    let alphas: Vec<f64> = (0..=n).map(|k| alpha0 + k as f64 * delta_alpha).collect();
    let top = *alphas.last().unwrap();
    if !(top > xmax) {
        return Err(Error::BankCoverage { max: xmax, top, required: required_levels(alpha0, delta_alpha, xmax) });
    }
    let taus = alphas.iter().map(|a| a / alpha0 * tau0).collect();
    Ok(FilterBank { alphas, taus })
}

/// Time-parameter law driving one Euler step.
#[derive(Debug, Clone, Copy)]
pub enum TauLaw<'a> {
    Linear,
    Exact { alpha: f64 },
    Simplified { alpha0: f64, kappa: f64 },
    Bank { bank: &'a FilterBank, kappa: f64 },
}

/// Stateful first-order integrator. Successive calls to [`Limiter::run`]
/// continue from the state left by the previous call, so a record can be
/// processed in segments with a different law per segment.
#[derive(Debug, Clone)]
pub struct Limiter {
    tau0: f64,
    dt: f64,
    state: Option<C64>,
}

impl Limiter {
    pub fn new(tau0: f64, sample_rate_hz: f64) -> Result<Self> {
        let dt = 1.0 / sample_rate_hz;
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::Config(format!("time constant must be positive, got {tau0}")));
        }
        if dt >= tau0 {
            return Err(Error::Numeric(format!(
                "sampling interval {dt:.3e} s is not below the time constant {tau0:.3e} s; Euler step unstable"
            )));
        }
        if dt > tau0 / 10.0 {
            log::warn!("sampling interval {dt:.3e} s exceeds tau0/10 = {:.3e} s; integration is coarse", tau0 / 10.0);
        }
        Ok(Self { tau0, dt, state: None })
    }

    pub fn state(&self) -> Option<C64> {
        self.state
    }

    /// Filters `x` into `out` (same length). Output sample `i + 1` is the
    /// Euler update driven by input sample `i`.
    pub fn run(&mut self, x: &[C64], law: TauLaw<'_>, out: &mut [C64]) -> Result<()> {
        debug_assert_eq!(x.len(), out.len());
        if x.is_empty() {
            return Ok(());
        }
        if let TauLaw::Bank { bank, kappa } = law {
            let peak = x.iter().map(|z| kappa * z.norm()).fold(0.0, f64::max);
            if peak > bank.top() {
                return Err(Error::BankCoverage {
                    max: peak,
                    top: bank.top(),
                    required: required_levels(bank.alpha0(), bank.delta_alpha().max(f64::MIN_POSITIVE), peak),
                });
            }
        }
        let rate0 = self.dt / self.tau0;
        let mut chi = self.state.unwrap_or(x[0]);
        for (xi, o) in x.iter().zip(out.iter_mut()) {
            *o = chi;
            let d = xi - chi;
            let gain = match law {
                TauLaw::Linear => rate0,
                TauLaw::Exact { alpha } => {
                    let m = d.norm();
                    if m <= alpha {
                        rate0
                    } else {
                        rate0 * alpha / m
                    }
                }
                TauLaw::Simplified { alpha0, kappa } => {
                    let u = kappa * xi.norm();
                    if u <= alpha0 {
                        rate0
                    } else {
                        rate0 * alpha0 / u
                    }
                }
                TauLaw::Bank { bank, kappa } => {
                    let k = bank.region(kappa * xi.norm()).unwrap_or(bank.n());
                    self.dt / bank.taus[k]
                }
            };
            chi += d * gain;
        }
        self.state = Some(chi);
        Ok(())
    }
}

fn filter_whole(x: &ComplexEnvelope, tau0: f64, law: TauLaw<'_>) -> Result<ComplexEnvelope> {
    let mut lim = Limiter::new(tau0, x.sample_rate_hz())?;
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    lim.run(x.samples(), law, &mut out)?;
    Ok(ComplexEnvelope::from_filtered(x.sample_rate_hz(), out))
}

/// First-order lowpass `dchi/dt = (x - chi)/tau`, explicit Euler.
pub fn linear_lowpass(x: &ComplexEnvelope, tau: f64) -> Result<ComplexEnvelope> {
    filter_whole(x, tau, TauLaw::Linear)
}

/// Complement of [`linear_lowpass`]: `x - lowpass(x)`.
pub fn first_order_highpass(x: &ComplexEnvelope, tau: f64) -> Result<ComplexEnvelope> {
    let lp = linear_lowpass(x, tau)?;
    let z = x.samples().iter().zip(lp.samples()).map(|(a, b)| a - b).collect();
    Ok(ComplexEnvelope::from_filtered(x.sample_rate_hz(), z))
}

pub fn andl_exact(x: &ComplexEnvelope, cfg: &AndlConfig, res: &ResolutionState) -> Result<ComplexEnvelope> {
    filter_whole(x, cfg.tau0_s, TauLaw::Exact { alpha: res.alpha })
}

pub fn andl_simplified(x: &ComplexEnvelope, cfg: &AndlConfig, res: &ResolutionState) -> Result<ComplexEnvelope> {
    filter_whole(x, cfg.tau0_s, TauLaw::Simplified { alpha0: res.alpha, kappa: cfg.kappa })
}

pub fn andl_filterbank(x: &ComplexEnvelope, bank: &FilterBank, cfg: &AndlConfig) -> Result<ComplexEnvelope> {
    filter_whole(x, cfg.tau0_s, TauLaw::Bank { bank, kappa: cfg.kappa })
}

/// Filter bank for a record: levels from `cfg.n_levels` or sized to cover
/// `kappa * max|x|`.
pub fn bank_for_record(x: &[C64], alpha0: f64, cfg: &AndlConfig) -> Result<FilterBank> {
    let xmax = cfg.kappa * x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = cfg.n_levels.unwrap_or_else(|| required_levels(alpha0, cfg.delta_alpha, xmax));
    build_filter_bank(alpha0, cfg.delta_alpha, n, cfg.tau0_s, xmax)
}

/// How the spread of the highpass residual is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaEstimator {
    /// Per-quadrature standard deviation of the complex residual.
    ComponentStd,
    /// `median(|z|) / sqrt(ln 4)`, the per-quadrature sigma of a circular
    /// Gaussian from the Rayleigh median; insensitive to sparse outliers.
    RobustMedian,
}

pub fn estimate_sigma(z: &[C64], estimator: SigmaEstimator) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Length("empty resolution window".into()));
    }
    let n = z.len() as f64;
    Ok(match estimator {
        SigmaEstimator::ComponentStd => {
            let mean: C64 = z.iter().sum::<C64>() / n;
            (z.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n / 2.0).sqrt()
        }
        SigmaEstimator::RobustMedian => {
            let mut mags: Vec<f64> = z.iter().map(|v| v.norm()).collect();
            let mid = mags.len() / 2;
            let (_, m, _) = mags.select_nth_unstable_by(mid, f64::total_cmp);
            *m / 4f64.ln().sqrt()
        }
    })
}

/// `alpha = erf_inv(1 - zeta) * sqrt(2) * sigma_z`, floored at [`ALPHA_FLOOR`].
pub fn alpha_from_sigma(sigma_z: f64, zeta: f64) -> Result<f64> {
    Ok((erf_inv(1.0 - zeta)? * std::f64::consts::SQRT_2 * sigma_z).max(ALPHA_FLOOR))
}

/// Resolution parameter from a noise-plus-signal record without outliers:
/// highpass with `tau0`, per-quadrature spread of the residual, then the
/// `(1 - zeta)` Gaussian quantile.
pub fn compute_resolution(clean_plus_thermal: &ComplexEnvelope, tau0: f64, zeta: f64) -> Result<ResolutionState> {
    let z = first_order_highpass(clean_plus_thermal, tau0)?;
    resolution_from_residual(z.samples(), zeta, SigmaEstimator::ComponentStd)
}

pub fn resolution_from_residual(z: &[C64], zeta: f64, estimator: SigmaEstimator) -> Result<ResolutionState> {
    let sigma_z = estimate_sigma(z, estimator)?;
    Ok(ResolutionState { alpha: alpha_from_sigma(sigma_z, zeta)?, sigma_z })
}

/// One resolution state per consecutive window of `window_len` samples of
/// the highpass residual of `x` (the last window may be short).
pub fn resolution_per_window(
    x: &ComplexEnvelope,
    tau0: f64,
    zeta: f64,
    window_len: usize,
    estimator: SigmaEstimator,
) -> Result<Vec<ResolutionState>> {
    if window_len == 0 {
        return Err(Error::Length("zero-length resolution window".into()));
    }
    let z = first_order_highpass(x, tau0)?;
    z.samples().chunks(window_len).map(|w| resolution_from_residual(w, zeta, estimator)).collect()
}
