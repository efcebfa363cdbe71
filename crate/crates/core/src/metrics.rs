//! Link-quality estimators: bit error counting, in-band SNR against a known
//! reference, Welch PSD and amplitude histograms.

use crate::error::{Error, Result};
use crate::signal::{BitFrame, ComplexEnvelope, C64};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Ceiling reported by [`estimate_snr`] when the residual vanishes.
pub const SNR_CAP_DB: f64 = 100.0;

/// Two-sided normal quantile for 95% coverage.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided normal quantile for 99% coverage.
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    /// Half-width of the 95% Wilson score interval.
    pub ci95: f64,
}

impl BerRecord {
    pub fn from_counts(errors: u64, bits: u64) -> Self {
        let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        let (lo, hi) = wilson_interval(errors, bits, Z95);
        Self { errors, bits, ber, ci95: 0.5 * (hi - lo) }
    }

    pub fn merge(&self, other: &BerRecord) -> Self {
        Self::from_counts(self.errors + other.errors, self.bits + other.bits)
    }

    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.errors, self.bits, z)
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(errors: u64, bits: u64, z: f64) -> (f64, f64) {
    if bits == 0 {
        return (0.0, 1.0);
    }
    let n = bits as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn count_ber(tx: &BitFrame, rx: &BitFrame) -> Result<BerRecord> {
    if tx.len() != rx.len() {
        return Err(Error::Length(format!("bit frames differ in length: {} vs {}", tx.len(), rx.len())));
    }
    let errors = tx.bits().iter().zip(rx.bits()).filter(|(a, b)| a != b).count();
    Ok(BerRecord::from_counts(errors as u64, tx.len() as u64))
}

fn band_limit(x: &[C64], rate: f64, band_hz: f64) -> Vec<C64> {
    let n = x.len();
    if band_hz >= rate / 2.0 {
        return x.to_vec();
    }
    let mut planner = FftPlanner::new();
    let mut buf = x.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * rate / n as f64;
        if f.abs() > band_hz {
            *v = C64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter_mut().for_each(|v| *v /= n as f64);
    buf
}

/// SNR of `processed` against `clean_ref` within `|f| <= band_hz`, in dB.
///
/// The processed signal is projected onto the reference with a least-squares
/// complex gain; the projection counts as signal and everything else as
/// noise plus distortion, so a global gain or phase change costs nothing.
/// A vanishing residual reports [`SNR_CAP_DB`].
pub fn estimate_snr(processed: &ComplexEnvelope, clean_ref: &ComplexEnvelope, band_hz: f64) -> Result<f64> {
    processed.check_compatible(clean_ref)?;
    let rate = processed.sample_rate_hz();
    let p = band_limit(processed.samples(), rate, band_hz);
    let r = band_limit(clean_ref.samples(), rate, band_hz);
    let rr: f64 = r.iter().map(|v| v.norm_sqr()).sum();
    if rr <= 0.0 {
        return Err(Error::Numeric("reference has zero in-band power".into()));
    }
    let pr: C64 = p.iter().zip(&r).map(|(a, b)| a * b.conj()).sum();
    let g = pr / rr;
    let signal = g.norm_sqr() * rr;
    let noise: f64 = p.iter().zip(&r).map(|(a, b)| (a - g * b).norm_sqr()).sum();
    if noise <= signal * 10f64.powf(-SNR_CAP_DB / 10.0) {
        return Ok(SNR_CAP_DB);
    }
    Ok(10.0 * (signal / noise).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Two-sided frequency axis, ascending from `-rate/2`.
    pub freqs_hz: Vec<f64>,
    /// Power per Hz; sums to the signal variance when multiplied by `resolution_hz`.
    pub density: Vec<f64>,
    pub resolution_hz: f64,
}

impl PsdEstimate {
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution_hz
    }

    /// Value at the bin nearest to `f_hz`.
    pub fn at(&self, f_hz: f64) -> f64 {
        let i = self
            .freqs_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f_hz).abs().total_cmp(&(b.1 - f_hz).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.density[i]
    }

    /// CSV with columns `f_hz, density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "f_hz,density")?;
        for (f, d) in self.freqs_hz.iter().zip(&self.density) {
            writeln!(w, "{f:.6e},{d:.12e}")?;
        }
        Ok(())
    }
}

/// Hann-windowed Welch periodogram average, two-sided.
pub fn welch_psd(sig: &ComplexEnvelope, seg_len: usize, overlap: f64) -> Result<PsdEstimate> {
    if seg_len == 0 || seg_len > sig.len() {
        return Err(Error::Length(format!("segment length {seg_len} invalid for {} samples", sig.len())));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Domain(format!("overlap fraction {overlap} not in [0, 1)")));
    }
    let rate = sig.sample_rate_hz();
    let window: Vec<f64> = (0..seg_len)
        .map(|i| if seg_len == 1 { 1.0 } else { 0.5 - 0.5 * (2.0 * PI * i as f64 / seg_len as f64).cos() })
        .collect();
    let u: f64 = window.iter().map(|w| w * w).sum();
    let hop = ((seg_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let x = sig.samples();
    let mut acc = vec![0.0; seg_len];
    let mut segments = 0usize;
    let mut buf = vec![C64::new(0.0, 0.0); seg_len];
    let mut start = 0;
    while start + seg_len <= x.len() {
        for (b, (v, w)) in buf.iter_mut().zip(x[start..start + seg_len].iter().zip(&window)) {
            *b = v * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * u * rate);
    // reorder bins to ascending frequency; the Nyquist bin of an even
    // length counts as negative
    let nonneg = seg_len.div_ceil(2);
    let order: Vec<usize> = (nonneg..seg_len).chain(0..nonneg).collect();
    let freqs_hz = order
        .iter()
        .map(|&k| if k < nonneg { k as f64 } else { k as f64 - seg_len as f64 } * rate / seg_len as f64)
        .collect();
    let density = order.iter().map(|&k| acc[k] * scale).collect();
    Ok(PsdEstimate { freqs_hz, density, resolution_hz: rate / seg_len as f64 })
}

/// Histogram of `|x|` normalised to a density over `[0, max_amp)`.
/// Returns `(bin_centre, pdf)` pairs; samples at or beyond `max_amp` are
/// counted in the normalisation but not binned.
pub fn amplitude_histogram(sig: &ComplexEnvelope, bins: usize, max_amp: f64) -> Result<Vec<(f64, f64)>> {
    if bins == 0 || !(max_amp > 0.0) {
        return Err(Error::Domain("histogram needs bins >= 1 and max_amp > 0".into()));
    }
    let width = max_amp / bins as f64;
    let mut counts = vec![0u64; bins];
    for z in sig.samples() {
        let b = (z.norm() / width) as usize;
        if b < bins {
            counts[b] += 1;
        }
    }
    let n = sig.len() as f64;
    Ok(counts.iter().enumerate().map(|(i, &c)| ((i as f64 + 0.5) * width, c as f64 / (n * width))).collect())
}

/// CSV with columns `bin_center, pdf`.
pub fn write_histogram_csv<W: Write>(hist: &[(f64, f64)], mut w: W) -> Result<()> {
    writeln!(w, "bin_center,pdf")?;
    for (c, p) in hist {
        writeln!(w, "{c:.6e},{p:.12e}")?;
    }
    Ok(())
}
