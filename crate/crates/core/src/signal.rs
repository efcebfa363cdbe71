//! OFDM baseband transmitter and receiver.
//!
//! The link runs at three sample rates:
//!
//! * chip rate `B_s`: one complex sample per subcarrier-time, the output of
//!   the inverse DFT;
//! * ADC rate: `adc_samples_per_chip` samples per chip, where the matched
//!   filter, blanking and clipping operate;
//! * analog rate: ADC rate times `oversample_factor`, the emulated
//!   continuous-time domain where noise is added and the limiter runs.
//!
//! Pulse shaping places chip `m` at analog index `(span/2 + m) * sps_analog`,
//! and all later filters are zero-phase, so the same chip sits at ADC index
//! `(span/2 + m) * sps_adc` after decimation and matched filtering.

use crate::error::{Error, Result};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

pub type C64 = Complex<f64>;

/// Half-length of the anti-alias filter ahead of the ADC, in ADC samples.
const ANTI_ALIAS_HALF_SPAN: usize = 6;

/// Uniformly sampled complex baseband waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    sample_rate_hz: f64,
    samples: Vec<C64>,
}

impl ComplexEnvelope {
    pub fn new(sample_rate_hz: f64, samples: Vec<C64>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Config(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::Length("envelope must hold at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {i}")));
        }
        Ok(Self { sample_rate_hz, samples })
    }

    /// Builds an envelope from samples produced by a stable filter. Finite
    /// values are checked in debug builds only.
    pub(crate) fn from_filtered(sample_rate_hz: f64, samples: Vec<C64>) -> Self {
        debug_assert!(sample_rate_hz > 0.0 && !samples.is_empty());
        debug_assert!(samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Self { sample_rate_hz, samples }
    }

    pub fn zeros(sample_rate_hz: f64, len: usize) -> Result<Self> {
        Self::new(sample_rate_hz, vec![C64::new(0.0, 0.0); len])
    }

    pub fn from_real(sample_rate_hz: f64, samples: &[f64]) -> Result<Self> {
        Self::new(sample_rate_hz, samples.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sampling interval in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean squared magnitude.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sample-wise sum of two envelopes at the same rate and length.
    pub fn add(&self, other: &ComplexEnvelope) -> Result<ComplexEnvelope> {
        self.check_compatible(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(Self::from_filtered(self.sample_rate_hz, samples))
    }

    pub fn scale(&self, k: f64) -> ComplexEnvelope {
        Self::from_filtered(self.sample_rate_hz, self.samples.iter().map(|z| z * k).collect())
    }

    pub(crate) fn check_compatible(&self, other: &ComplexEnvelope) -> Result<()> {
        if self.samples.len() != other.samples.len() {
            return Err(Error::Length(format!(
                "envelope lengths differ: {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        if (self.sample_rate_hz - other.sample_rate_hz).abs() > 1e-9 * self.sample_rate_hz {
            return Err(Error::Config(format!(
                "sample rates differ: {} vs {}",
                self.sample_rate_hz, other.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Debug dump with columns `t_s, re, im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,re,im")?;
        let dt = self.dt();
        for (i, z) in self.samples.iter().enumerate() {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", i as f64 * dt, z.re, z.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Modulation {
    #[default]
    Bpsk,
}

/// Link parameters shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    /// Signal bandwidth `B_s`, which is also the chip rate.
    pub bandwidth_hz: f64,
    pub rolloff: f64,
    /// Analog-rate samples per ADC-rate sample.
    pub oversample_factor: usize,
    /// ADC-rate samples per chip.
    pub adc_samples_per_chip: usize,
    pub rrc_span_symbols: usize,
    pub modulation: Modulation,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 512,
            bandwidth_hz: 100e3,
            rolloff: 0.25,
            oversample_factor: 32,
            adc_samples_per_chip: 4,
            rrc_span_symbols: 24,
            modulation: Modulation::Bpsk,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_subcarriers;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!("n_subcarriers must be a power of two >= 2, got {n}")));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz)));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!("rolloff must lie in [0, 1], got {}", self.rolloff)));
        }
        if self.oversample_factor < 4 {
            return Err(Error::Config(format!(
                "oversample_factor must be >= 4, got {}",
                self.oversample_factor
            )));
        }
        if self.rrc_span_symbols < 4 {
            return Err(Error::Config(format!(
                "rrc_span_symbols must be >= 4, got {}",
                self.rrc_span_symbols
            )));
        }
        if self.adc_rate_hz() < self.bandwidth_hz * (1.0 + self.rolloff) {
            return Err(Error::Config(format!(
                "ADC rate {} Hz is below the shaped-signal bandwidth {} Hz",
                self.adc_rate_hz(),
                self.bandwidth_hz * (1.0 + self.rolloff)
            )));
        }
        if (self.rrc_span_symbols * self.adc_samples_per_chip) % 2 != 0 {
            return Err(Error::Config(
                "rrc_span_symbols * adc_samples_per_chip must be even to centre the pulse on an ADC sample".into(),
            ));
        }
        Ok(())
    }

    /// Active OFDM symbol duration `T = N / B_s`.
    pub fn symbol_duration_s(&self) -> f64 {
        self.n_subcarriers as f64 / self.bandwidth_hz
    }

    pub fn chip_rate_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn adc_rate_hz(&self) -> f64 {
        self.bandwidth_hz * self.adc_samples_per_chip as f64
    }

    pub fn analog_rate_hz(&self) -> f64 {
        self.adc_rate_hz() * self.oversample_factor as f64
    }

    pub fn analog_samples_per_chip(&self) -> usize {
        self.adc_samples_per_chip * self.oversample_factor
    }

    /// ADC-rate index of chip 0 after shaping, decimation and matched filtering.
    pub fn first_chip_adc_index(&self) -> usize {
        self.rrc_span_symbols * self.adc_samples_per_chip / 2
    }

    /// Analog-rate index of chip 0 in a shaped waveform.
    pub fn first_chip_analog_index(&self) -> usize {
        self.first_chip_adc_index() * self.oversample_factor
    }

    /// Analog-rate length of a shaped waveform carrying `n_chips` chips.
    pub fn shaped_len(&self, n_chips: usize) -> usize {
        (n_chips - 1 + self.rrc_span_symbols) * self.analog_samples_per_chip() + 1
    }
}

/// Hard bits of one or more OFDM symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFrame(Vec<u8>);

impl BitFrame {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Domain(format!("bit {i} has value {}", bits[i])));
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Unit-energy root-raised-cosine taps, `span * sps + 1` long and centred.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let len = span * sps + 1;
    let mid = (len - 1) as f64 / 2.0;
    let b = rolloff;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let t = (i as f64 - mid) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if b > 0.0 && (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                b / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
                let den = PI * t * (1.0 - (4.0 * b * t).powi(2));
                num / den
            }
        })
        .collect();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    taps
}

/// Forward/inverse DFT pair with unitary `1/sqrt(N)` scaling.
#[derive(Clone)]
pub struct OfdmTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmTransform").field("n", &self.n).finish()
    }
}

impl OfdmTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn check(&self, len: usize, what: &str) -> Result<()> {
        if len == 0 || len % self.n != 0 {
            return Err(Error::Length(format!("{what}: {len} samples is not a nonzero multiple of N = {}", self.n)));
        }
        Ok(())
    }

    /// Inverse transform of each `N`-block of subcarrier symbols.
    pub fn to_time(&self, symbols: &[C64]) -> Result<Vec<C64>> {
        self.check(symbols.len(), "ofdm symbols")?;
        let mut buf = symbols.to_vec();
        self.inverse.process(&mut buf);
        let k = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= k);
        Ok(buf)
    }

    /// Forward transform of each `N`-block of chips.
    pub fn to_freq(&self, chips: &[C64]) -> Result<Vec<C64>> {
        self.check(chips.len(), "ofdm chips")?;
        let mut buf = chips.to_vec();
        self.forward.process(&mut buf);
        let k = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= k);
        Ok(buf)
    }
}

/// BPSK mapping: bit 0 to +1, bit 1 to -1.
pub fn modulate_bits(bits: &BitFrame, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    if bits.is_empty() || bits.len() % cfg.n_subcarriers != 0 {
        return Err(Error::Length(format!(
            "{} bits do not fill whole OFDM symbols of {} subcarriers",
            bits.len(),
            cfg.n_subcarriers
        )));
    }
    match cfg.modulation {
        Modulation::Bpsk => Ok(bits
            .bits()
            .iter()
            .map(|&b| C64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect()),
    }
}

/// Inverse DFT of each OFDM symbol, serialized at the chip rate.
pub fn ofdm_chips(symbols: &[C64], cfg: &OfdmConfig) -> Result<Vec<C64>> {
    OfdmTransform::new(cfg.n_subcarriers).to_time(symbols)
}

/// RRC pulse shaping of a chip sequence onto the analog-rate grid.
///
/// Taps are scaled so that unit-power chips produce a unit-power waveform.
pub fn pulse_shape(chips: &[C64], cfg: &OfdmConfig) -> Result<ComplexEnvelope> {
    if chips.is_empty() {
        return Err(Error::Length("no chips to shape".into()));
    }
    let sps = cfg.analog_samples_per_chip();
    let gain = (sps as f64).sqrt();
    let taps: Vec<f64> = rrc_taps(cfg.rolloff, sps, cfg.rrc_span_symbols).into_iter().map(|h| h * gain).collect();
    let mut out = vec![C64::new(0.0, 0.0); cfg.shaped_len(chips.len())];
    for (m, c) in chips.iter().enumerate() {
        let seg = &mut out[m * sps..m * sps + taps.len()];
        for (o, &h) in seg.iter_mut().zip(&taps) {
            *o += c * h;
        }
    }
    Ok(ComplexEnvelope::from_filtered(cfg.analog_rate_hz(), out))
}

/// Inverse DFT plus pulse shaping. `symbols` may hold several OFDM symbols
/// back to back; they are transmitted without cyclic prefix.
pub fn ofdm_modulate(symbols: &[C64], cfg: &OfdmConfig) -> Result<ComplexEnvelope> {
    cfg.validate()?;
    let chips = ofdm_chips(symbols, cfg)?;
    pulse_shape(&chips, cfg)
}

/// Blackman-windowed sinc with cutoff at half the ADC rate, unity DC gain.
pub fn anti_alias_taps(cfg: &OfdmConfig) -> Vec<f64> {
    let os = cfg.oversample_factor;
    let half = ANTI_ALIAS_HALF_SPAN * os;
    let len = 2 * half + 1;
    let fc = 0.5 / os as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let n = i as f64 - half as f64;
            let sinc = if n == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * n).sin() / (PI * n) };
            let w = 0.42 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos()
                + 0.08 * (4.0 * PI * i as f64 / (len - 1) as f64).cos();
            sinc * w
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= dc);
    taps
}

/// Anti-alias filtering and decimation from the analog rate to the ADC rate.
/// The filter is applied zero-phase, so ADC sample `j` corresponds to analog
/// sample `j * oversample_factor`.
pub fn adc_sample(analog: &ComplexEnvelope, cfg: &OfdmConfig) -> Result<ComplexEnvelope> {
    check_rate(analog, cfg.analog_rate_hz(), "adc_sample input")?;
    let os = cfg.oversample_factor;
    let taps = anti_alias_taps(cfg);
    let half = (taps.len() - 1) / 2;
    let x = analog.samples();
    let n_out = x.len().div_ceil(os);
    let out = (0..n_out)
        .map(|j| {
            let centre = j * os;
            let lo = centre.saturating_sub(half);
            let hi = (centre + half).min(x.len() - 1);
            let mut acc = C64::new(0.0, 0.0);
            for (n, xv) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc += xv * taps[n + half - centre];
            }
            acc
        })
        .collect();
    Ok(ComplexEnvelope::from_filtered(cfg.adc_rate_hz(), out))
}

fn check_rate(sig: &ComplexEnvelope, expected: f64, what: &str) -> Result<()> {
    if (sig.sample_rate_hz() - expected).abs() > 1e-9 * expected {
        return Err(Error::Config(format!(
            "{what}: expected {expected} Hz sampling, got {} Hz",
            sig.sample_rate_hz()
        )));
    }
    Ok(())
}

/// Zero-phase FIR: output `i` is centred on input `i`. `taps` must be odd length.
pub fn fir_centered(x: &[C64], taps: &[f64]) -> Vec<C64> {
    debug_assert!(taps.len() % 2 == 1);
    let half = (taps.len() - 1) / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            let k_lo = (half + i + 1).saturating_sub(n);
            let k_hi = (half + i).min(taps.len() - 1);
            for k in k_lo..=k_hi {
                // y[i] = sum_k h[k] x[i + half - k]
                acc += x[i + half - k] * taps[k];
            }
            acc
        })
        .collect()
}

/// Matched filter taps at the ADC rate (unit energy, symmetric).
pub fn matched_filter_taps(cfg: &OfdmConfig) -> Vec<f64> {
    rrc_taps(cfg.rolloff, cfg.adc_samples_per_chip, cfg.rrc_span_symbols)
}

/// `h + tau0 * dh/dt`, with the derivative taken by central differences at
/// the ADC sampling interval and zero padding beyond both ends.
pub fn modified_matched_filter_taps(cfg: &OfdmConfig, tau0: f64) -> Vec<f64> {
    let h = matched_filter_taps(cfg);
    let t_adc = 1.0 / cfg.adc_rate_hz();
    let at = |k: isize| if k < 0 || k as usize >= h.len() { 0.0 } else { h[k as usize] };
    (0..h.len() as isize)
        .map(|k| at(k) + tau0 * (at(k + 1) - at(k - 1)) / (2.0 * t_adc))
        .collect()
}

pub fn matched_filter(sig: &ComplexEnvelope, cfg: &OfdmConfig) -> Result<ComplexEnvelope> {
    check_rate(sig, cfg.adc_rate_hz(), "matched_filter input")?;
    let taps = matched_filter_taps(cfg);
    Ok(ComplexEnvelope::from_filtered(sig.sample_rate_hz(), fir_centered(sig.samples(), &taps)))
}

/// Matched filter compensated for a first-order lowpass with time constant `tau0`.
pub fn modified_matched_filter(sig: &ComplexEnvelope, cfg: &OfdmConfig, tau0: f64) -> Result<ComplexEnvelope> {
    check_rate(sig, cfg.adc_rate_hz(), "modified_matched_filter input")?;
    if !(tau0 >= 0.0 && tau0.is_finite()) {
        return Err(Error::Config(format!("tau0 must be nonnegative, got {tau0}")));
    }
    let taps = modified_matched_filter_taps(cfg, tau0);
    Ok(ComplexEnvelope::from_filtered(sig.sample_rate_hz(), fir_centered(sig.samples(), &taps)))
}

/// Peak amplitude of one unit chip after shaping, decimation and matched
/// filtering (anti-alias passband taken as flat).
pub fn chip_gain(cfg: &OfdmConfig) -> f64 {
    let sps = cfg.analog_samples_per_chip();
    let tx = rrc_taps(cfg.rolloff, sps, cfg.rrc_span_symbols);
    let scale = (sps as f64).sqrt();
    tx.iter()
        .step_by(cfg.oversample_factor)
        .map(|h| (h * scale).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Picks the chip-instant samples out of a matched-filter output and
/// normalises them by [`chip_gain`].
pub fn sample_chips(mf_out: &ComplexEnvelope, n_chips: usize, cfg: &OfdmConfig) -> Result<ComplexEnvelope> {
    check_rate(mf_out, cfg.adc_rate_hz(), "sample_chips input")?;
    let first = cfg.first_chip_adc_index();
    let step = cfg.adc_samples_per_chip;
    let last = first + n_chips.saturating_sub(1) * step;
    if n_chips == 0 || last >= mf_out.len() {
        return Err(Error::Length(format!(
            "cannot take {n_chips} chips from {} ADC samples",
            mf_out.len()
        )));
    }
    let g = 1.0 / chip_gain(cfg);
    let chips = (0..n_chips).map(|m| mf_out.samples()[first + m * step] * g).collect();
    Ok(ComplexEnvelope::from_filtered(cfg.chip_rate_hz(), chips))
}

/// Forward DFT of chip-rate samples, one block of `N` per OFDM symbol.
pub fn ofdm_demodulate(sig: &ComplexEnvelope, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    OfdmTransform::new(cfg.n_subcarriers).to_freq(sig.samples())
}

/// BPSK hard decision on the real part; `Re >= 0` (including an exact tie)
/// maps to bit 0.
pub fn demap_bits(symbols: &[C64]) -> BitFrame {
    BitFrame(symbols.iter().map(|z| u8::from(z.re < 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(n: usize) -> OfdmConfig {
        OfdmConfig { n_subcarriers: n, ..OfdmConfig::default() }
    }

    #[test]
    fn bpsk_map() {
        let cfg = small_cfg(4);
        let s = modulate_bits(&BitFrame::new(vec![0, 1, 0, 1]).unwrap(), &cfg).unwrap();
        let re: Vec<f64> = s.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, -1.0, 1.0, -1.0]);
        assert!(s.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn all_zero_frame_maps_to_plus_one() {
        let cfg = small_cfg(8);
        let s = modulate_bits(&BitFrame::new(vec![0; 16]).unwrap(), &cfg).unwrap();
        assert!(s.iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn modulate_rejects_partial_symbol() {
        let cfg = small_cfg(4);
        let err = modulate_bits(&BitFrame::new(vec![0, 1, 0]).unwrap(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Length(_)));
    }

    #[test]
    fn bitframe_rejects_non_binary() {
        assert!(BitFrame::new(vec![0, 2]).is_err());
    }

    #[test]
    fn demap_ties_to_zero() {
        let f = demap_bits(&[C64::new(0.9, 0.0), C64::new(-1.1, 0.3), C64::new(0.0, -1.0)]);
        assert_eq!(f.bits(), &[0, 1, 0]);
    }

    #[test]
    fn ofdm_rejects_wrong_symbol_count() {
        let cfg = small_cfg(8);
        assert!(ofdm_modulate(&[C64::new(1.0, 0.0); 5], &cfg).is_err());
        assert!(ofdm_demodulate(&ComplexEnvelope::zeros(1.0, 7).unwrap(), &cfg).is_err());
    }

    #[test]
    fn subcarrier_impulse_is_complex_exponential() {
        let n = 16;
        let cfg = small_cfg(n);
        let k = 3;
        let mut s = vec![C64::new(0.0, 0.0); n];
        s[k] = C64::new(1.0, 0.0);
        let chips = ofdm_chips(&s, &cfg).unwrap();
        for (t, c) in chips.iter().enumerate() {
            let want = C64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * (k * t) as f64 / n as f64);
            assert!((c - want).norm() < 1e-12);
        }
    }

    #[test]
    fn dc_subcarrier_gives_constant_envelope() {
        let cfg = OfdmConfig { n_subcarriers: 64, ..OfdmConfig::default() };
        let mut s = vec![C64::new(0.0, 0.0); 64];
        s[0] = C64::new(1.0, 0.0);
        let env = ofdm_modulate(&s, &cfg).unwrap();
        let sps = cfg.analog_samples_per_chip();
        // Away from the ramps the shaped constant must settle to 1/sqrt(N).
        let lo = cfg.first_chip_analog_index() + cfg.rrc_span_symbols * sps;
        let hi = cfg.first_chip_analog_index() + (64 - cfg.rrc_span_symbols) * sps;
        let mags: Vec<f64> = env.samples()[lo..hi].iter().map(|z| z.norm()).collect();
        let (mn, mx) = mags.iter().fold((f64::MAX, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
        // the truncated pulse tails leave a chip-rate ripple of about 0.2%
        assert!((mx - mn) / mx < 5e-3, "ripple {mn}..{mx}");
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        assert!((mean - 1.0 / 8.0).abs() < 1e-2 / 8.0, "{mean}");
    }

    #[test]
    fn zero_waveform_demodulates_to_zero() {
        let cfg = small_cfg(8);
        let out = ofdm_demodulate(&ComplexEnvelope::zeros(cfg.chip_rate_hz(), 8).unwrap(), &cfg).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn transform_round_trip() {
        let cfg = small_cfg(32);
        let bits: Vec<u8> = (0..64).map(|i| ((i * 7 + 3) % 5 % 2) as u8).collect();
        let s = modulate_bits(&BitFrame::new(bits).unwrap(), &cfg).unwrap();
        let chips = ofdm_chips(&s, &cfg).unwrap();
        let back = ofdm_demodulate(&ComplexEnvelope::new(cfg.chip_rate_hz(), chips).unwrap(), &cfg).unwrap();
        for (a, b) in s.iter().zip(&back) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn unit_impulse_through_matched_filter_gives_taps() {
        let cfg = OfdmConfig::default();
        let h = matched_filter_taps(&cfg);
        let mut x = vec![C64::new(0.0, 0.0); 101];
        x[50] = C64::new(1.0, 0.0);
        let y = matched_filter(&ComplexEnvelope::new(cfg.adc_rate_hz(), x).unwrap(), &cfg).unwrap();
        let half = (h.len() - 1) / 2;
        for (k, hk) in h.iter().enumerate() {
            assert!((y.samples()[50 - half + k].re - hk).abs() < 1e-15);
        }
    }

    #[test]
    fn modified_filter_reduces_to_matched_at_zero_tau() {
        let cfg = OfdmConfig::default();
        assert_eq!(modified_matched_filter_taps(&cfg, 0.0), matched_filter_taps(&cfg));
    }

    #[test]
    fn derivative_term_is_antisymmetric() {
        let cfg = OfdmConfig::default();
        let tau0 = 1.0 / (4.0 * PI * cfg.bandwidth_hz);
        let h = matched_filter_taps(&cfg);
        let hm = modified_matched_filter_taps(&cfg, tau0);
        let d: Vec<f64> = hm.iter().zip(&h).map(|(a, b)| a - b).collect();
        let l = d.len();
        for k in 0..l {
            assert!((d[k] + d[l - 1 - k]).abs() < 1e-12);
        }
        // and the modified taps are no longer symmetric
        assert!((hm[l / 2 - 3] - hm[l / 2 + 3]).abs() > 1e-3);
    }

    #[test]
    fn matched_filter_rejects_wrong_rate() {
        let cfg = OfdmConfig::default();
        let env = ComplexEnvelope::zeros(cfg.analog_rate_hz(), 64).unwrap();
        assert!(matched_filter(&env, &cfg).is_err());
    }

    #[test]
    fn envelope_invariants() {
        assert!(ComplexEnvelope::new(0.0, vec![C64::new(0.0, 0.0)]).is_err());
        assert!(ComplexEnvelope::new(1.0, vec![]).is_err());
        assert!(ComplexEnvelope::new(1.0, vec![C64::new(f64::NAN, 0.0)]).is_err());
        assert!(ComplexEnvelope::new(1.0, vec![C64::new(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OfdmConfig::default().validate().is_ok());
        assert!(OfdmConfig { n_subcarriers: 500, ..Default::default() }.validate().is_err());
        assert!(OfdmConfig { oversample_factor: 2, ..Default::default() }.validate().is_err());
        assert!(OfdmConfig { adc_samples_per_chip: 1, ..Default::default() }.validate().is_err());
        assert!(OfdmConfig { rolloff: 1.5, ..Default::default() }.validate().is_err());
        assert!(OfdmConfig { rrc_span_symbols: 2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn rates_and_alignment() {
        let cfg = OfdmConfig::default();
        assert_eq!(cfg.adc_rate_hz(), 400e3);
        assert_eq!(cfg.analog_rate_hz(), 12.8e6);
        assert_eq!(cfg.analog_samples_per_chip(), 128);
        assert_eq!(cfg.first_chip_adc_index(), 48);
        assert!((cfg.symbol_duration_s() - 5.12e-3).abs() < 1e-15);
    }
}
