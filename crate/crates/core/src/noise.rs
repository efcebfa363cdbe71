//! Thermal and impulsive noise generators.
//!
//! Impulsive noise is a Poisson-gated process: bursts of fixed duration
//! `tau_as` start at Poisson arrival times with rate `lambda`, each burst
//! carries a real Gaussian amplitude `A_k`, and the waveform inside the gates
//! is `sum_k A_k * nu(t)` with `nu` unit-variance circular complex white noise.
//! Overlapping bursts superpose their amplitudes.

use crate::error::{Error, Result};
use crate::signal::{ComplexEnvelope, C64};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalNoiseSpec {
    /// Total complex variance; each quadrature carries half.
    pub variance: f64,
}

impl ThermalNoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!("thermal variance must be >= 0, got {variance}")));
        }
        Ok(Self { variance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulseNoiseSpec {
    pub arrival_rate_hz: f64,
    pub burst_duration_s: f64,
    /// Power inside an isolated burst.
    pub burst_variance: f64,
    /// Variance of the per-burst amplitude `A_k`.
    pub amplitude_variance: f64,
}

impl ImpulseNoiseSpec {
    /// Spec with `Var(A_k) = burst_variance`, so an isolated burst carries
    /// exactly `burst_variance` of power against unit-variance `nu`.
    pub fn new(arrival_rate_hz: f64, burst_duration_s: f64, burst_variance: f64) -> Result<Self> {
        let spec = Self { arrival_rate_hz, burst_duration_s, burst_variance, amplitude_variance: burst_variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self { arrival_rate_hz: 0.0, burst_duration_s: 1e-6, burst_variance: 0.0, amplitude_variance: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate_hz >= 0.0 && self.arrival_rate_hz.is_finite()) {
            return Err(Error::Config(format!("arrival rate must be >= 0, got {}", self.arrival_rate_hz)));
        }
        if !(self.burst_duration_s > 0.0 && self.burst_duration_s.is_finite()) {
            return Err(Error::Config(format!("burst duration must be > 0, got {}", self.burst_duration_s)));
        }
        if !(self.burst_variance >= 0.0 && self.burst_variance.is_finite()) {
            return Err(Error::Config(format!("burst variance must be >= 0, got {}", self.burst_variance)));
        }
        if !(self.amplitude_variance >= 0.0 && self.amplitude_variance.is_finite()) {
            return Err(Error::Config(format!(
                "amplitude variance must be >= 0, got {}",
                self.amplitude_variance
            )));
        }
        if self.occupancy() > 1.0 {
            return Err(Error::Config(format!(
                "lambda * tau_as = {} exceeds 1; bursts would overlap almost surely",
                self.occupancy()
            )));
        }
        Ok(())
    }

    /// Expected fraction of time covered by bursts, `lambda * tau_as`.
    pub fn occupancy(&self) -> f64 {
        self.arrival_rate_hz * self.burst_duration_s
    }
}

/// An impulsive-noise record together with its gating.
#[derive(Debug, Clone)]
pub struct ImpulsiveRealization {
    pub envelope: ComplexEnvelope,
    /// Number of bursts covering each sample.
    pub gate_counts: Vec<u16>,
    /// Bursts that intersect the record.
    pub n_bursts: usize,
}

impl ImpulsiveRealization {
    /// Gate multiplicity summed over samples, divided by the record length:
    /// total burst time over record time, the empirical `lambda * tau_as`.
    pub fn burst_time_fraction(&self) -> f64 {
        self.gate_counts.iter().map(|&c| c as f64).sum::<f64>() / self.gate_counts.len() as f64
    }

    /// Fraction of samples inside at least one burst.
    pub fn gated_fraction(&self) -> f64 {
        self.gate_counts.iter().filter(|&&c| c > 0).count() as f64 / self.gate_counts.len() as f64
    }

    /// Mean power over samples covered by exactly one burst.
    pub fn isolated_burst_power(&self) -> Option<f64> {
        let (sum, n) = self
            .gate_counts
            .iter()
            .zip(self.envelope.samples())
            .filter(|(&c, _)| c == 1)
            .fold((0.0, 0usize), |(s, n), (_, z)| (s + z.norm_sqr(), n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, std_per_component: f64) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * std_per_component, im * std_per_component)
}

/// Circular complex white Gaussian noise of total variance `spec.variance`.
pub fn gen_awgn<R: Rng + ?Sized>(spec: &ThermalNoiseSpec, n: usize, rate_hz: f64, rng: &mut R) -> Result<ComplexEnvelope> {
    if n == 0 {
        return Err(Error::Length("gen_awgn needs n >= 1".into()));
    }
    if spec.variance == 0.0 {
        return ComplexEnvelope::zeros(rate_hz, n);
    }
    let s = (spec.variance / 2.0).sqrt();
    let samples = (0..n).map(|_| complex_normal(rng, s)).collect();
    ComplexEnvelope::new(rate_hz, samples)
}

pub fn gen_impulsive<R: Rng + ?Sized>(spec: &ImpulseNoiseSpec, n: usize, rate_hz: f64, rng: &mut R) -> Result<ComplexEnvelope> {
    Ok(gen_impulsive_gated(spec, n, rate_hz, rng)?.envelope)
}

/// Generates `n` samples of impulsive noise at `rate_hz`.
///
/// Arrivals are drawn over `[-tau_as, n/rate)` so bursts straddling the start
/// of the record are represented; bursts are truncated at both record edges.
pub fn gen_impulsive_gated<R: Rng + ?Sized>(
    spec: &ImpulseNoiseSpec,
    n: usize,
    rate_hz: f64,
    rng: &mut R,
) -> Result<ImpulsiveRealization> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Length("gen_impulsive needs n >= 1".into()));
    }
    if !(rate_hz > 0.0) {
        return Err(Error::Config(format!("sample rate must be positive, got {rate_hz}")));
    }
    let dt = 1.0 / rate_hz;
    let tau = spec.burst_duration_s;
    if rate_hz * tau < 1.0 {
        return Err(Error::Config(format!(
            "burst duration {tau} s is shorter than one sample at {rate_hz} Hz"
        )));
    }
    let mut gate_counts = vec![0u16; n];
    let mut amp = vec![0.0f64; n];
    let mut n_bursts = 0usize;
    if spec.arrival_rate_hz > 0.0 && spec.amplitude_variance > 0.0 {
        let inter = Exp::new(spec.arrival_rate_hz).map_err(|e| Error::Config(e.to_string()))?;
        let a_std = spec.amplitude_variance.sqrt();
        let t_end = n as f64 * dt;
        let mut t = -tau;
        loop {
            t += inter.sample(rng);
            if t >= t_end {
                break;
            }
            let g: f64 = StandardNormal.sample(rng);
            let a = a_std * g;
            // samples with t_k <= i*dt < t_k + tau
            let start = (t / dt).ceil().max(0.0) as usize;
            let stop = (((t + tau) / dt).ceil().max(0.0) as usize).min(n);
            if start >= stop {
                continue;
            }
            n_bursts += 1;
            for i in start..stop {
                gate_counts[i] = gate_counts[i].saturating_add(1);
                amp[i] += a;
            }
        }
    }
    let samples = amp
        .iter()
        .zip(&gate_counts)
        .map(|(&a, &c)| if c == 0 { C64::new(0.0, 0.0) } else { complex_normal(rng, std::f64::consts::FRAC_1_SQRT_2) * a })
        .collect();
    Ok(ImpulsiveRealization { envelope: ComplexEnvelope::new(rate_hz, samples)?, gate_counts, n_bursts })
}

/// Fraction of samples whose magnitude exceeds `threshold`.
pub fn occupancy(env: &ComplexEnvelope, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("threshold must be >= 0, got {threshold}")));
    }
    let hits = env.samples().iter().filter(|z| z.norm() > threshold).count();
    Ok(hits as f64 / env.len() as f64)
}

/// Burst power giving the requested signal-to-impulse ratio against a
/// signal of power `signal_variance`.
pub fn sir_to_burst_variance(sir_db: f64, signal_variance: f64) -> f64 {
    signal_variance / 10f64.powf(sir_db / 10.0)
}
