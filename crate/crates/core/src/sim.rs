//! Scenario configuration, Monte Carlo link runs, sweeps and result files.
//!
//! A run is split into frames of [`FRAME_SYMBOLS`] OFDM symbols. Each frame
//! is transmitted on its own (zero-padded by the pulse tails), and its bits,
//! thermal noise and impulsive noise come from independent ChaCha streams
//! seeded by [`stream_seed`] from `(master seed, frame index, component)`.
//! Frames therefore run in any order or in parallel with identical results,
//! and every mitigation method requested in one call sees the same received
//! waveform.

use crate::analytic::{self, MixtureParams, PowerBreakdown, QuantizationGrid};
use crate::andl::{
    bank_for_record, first_order_highpass, linear_lowpass, resolution_from_residual, AndlConfig, AndlMode, Limiter,
    SigmaEstimator, TauLaw,
};
use crate::baseline::{self, ThresholdMethod, ThresholdSpec};
use crate::error::{Error, Result};
use crate::metrics::{BerRecord, SNR_CAP_DB};
use crate::noise::{gen_awgn, gen_impulsive_gated, sir_to_burst_variance, ImpulseNoiseSpec, ThermalNoiseSpec};
use crate::signal::{
    adc_sample, demap_bits, fir_centered, matched_filter_taps, modified_matched_filter_taps, modulate_bits, ofdm_modulate,
    sample_chips, BitFrame, ComplexEnvelope, OfdmConfig, OfdmTransform, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

/// OFDM symbols per independently transmitted frame.
pub const FRAME_SYMBOLS: usize = 4;

/// Stream components of a frame.
pub const STREAM_BITS: u64 = 1;
pub const STREAM_THERMAL: u64 = 2;
pub const STREAM_IMPULSE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mitigation {
    None,
    Linear,
    AndlExact,
    AndlSimplified,
    AndlFilterBank,
    Blanking,
    Clipping,
}

impl Mitigation {
    pub const ALL: [Mitigation; 7] = [
        Mitigation::None,
        Mitigation::Linear,
        Mitigation::AndlExact,
        Mitigation::AndlSimplified,
        Mitigation::AndlFilterBank,
        Mitigation::Blanking,
        Mitigation::Clipping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mitigation::None => "none",
            Mitigation::Linear => "linear",
            Mitigation::AndlExact => "andl_exact",
            Mitigation::AndlSimplified => "andl_simplified",
            Mitigation::AndlFilterBank => "andl_filterbank",
            Mitigation::Blanking => "blanking",
            Mitigation::Clipping => "clipping",
        }
    }

    pub fn is_andl(self) -> bool {
        matches!(self, Mitigation::AndlExact | Mitigation::AndlSimplified | Mitigation::AndlFilterBank)
    }

    pub fn threshold_method(self) -> Option<ThresholdMethod> {
        match self {
            Mitigation::Blanking => Some(ThresholdMethod::Blanking),
            Mitigation::Clipping => Some(ThresholdMethod::Clipping),
            _ => None,
        }
    }

    fn works_on_adc_output(self) -> bool {
        matches!(self, Mitigation::None | Mitigation::Blanking | Mitigation::Clipping)
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn normalise_name(s: &str) -> String {
    s.chars().filter(|c| *c != '_' && *c != '-').flat_map(char::to_lowercase).collect()
}

impl FromStr for Mitigation {
    type Err = Error;

    /// Accepts `andl_exact`, `AndlExact`, `andl-exact` and the like.
    fn from_str(s: &str) -> Result<Self> {
        let key = normalise_name(s);
        Mitigation::ALL
            .into_iter()
            .find(|m| normalise_name(m.name()) == key)
            .ok_or_else(|| Error::Config(format!("unknown mitigation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RxFilter {
    Matched,
    ModifiedMatched,
}

impl FromStr for RxFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalise_name(s).as_str() {
            "matched" => Ok(RxFilter::Matched),
            "modifiedmatched" | "modified" => Ok(RxFilter::ModifiedMatched),
            _ => Err(Error::Config(format!("unknown rx_filter `{s}`"))),
        }
    }
}

/// Thermal noise level: Eb/N0 of the link, or the analog-rate variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThermalLevel {
    EbN0Db(f64),
    Variance(f64),
}

/// Burst power: signal-to-impulse ratio, or the analog-rate variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ImpulseLevel {
    SirDb(f64),
    Variance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub ofdm: OfdmConfig,
    pub thermal: ThermalLevel,
    pub impulse: ImpulseLevel,
    pub lambda_hz: f64,
    pub tau_as_s: f64,
    pub mitigation: Mitigation,
    pub andl: AndlConfig,
    pub rx_filter: RxFilter,
    pub n_symbols: usize,
    pub seed: u64,
    /// Fixed blanking/clipping threshold; `None` runs the grid search.
    pub threshold: Option<f64>,
    /// Square-pulse duration for the analytic signal and thermal terms;
    /// `None` uses `1 / (2 B (1 + beta))`.
    pub analytic_dt_s: Option<f64>,
}

impl SimScenario {
    /// AWGN-only scenario with defaults for everything else.
    pub fn awgn(ebn0_db: f64, mitigation: Mitigation, n_symbols: usize, seed: u64) -> Self {
        let ofdm = OfdmConfig::default();
        let rx_filter = default_rx_filter(mitigation);
        Self {
            andl: AndlConfig::for_bandwidth(ofdm.bandwidth_hz, andl_mode(mitigation)),
            ofdm,
            thermal: ThermalLevel::EbN0Db(ebn0_db),
            impulse: ImpulseLevel::Variance(0.0),
            lambda_hz: 0.0,
            tau_as_s: 1e-6,
            mitigation,
            rx_filter,
            n_symbols,
            seed,
            threshold: None,
            analytic_dt_s: None,
        }
    }

    /// Adds Poisson-gated bursts at the given SIR.
    pub fn with_impulses(mut self, sir_db: f64, lambda_hz: f64, tau_as_s: f64) -> Self {
        self.impulse = ImpulseLevel::SirDb(sir_db);
        self.lambda_hz = lambda_hz;
        self.tau_as_s = tau_as_s;
        self
    }

    /// Switches the method, keeping the limiter mode in step.
    pub fn with_mitigation(mut self, m: Mitigation) -> Self {
        self.mitigation = m;
        self.andl.mode = andl_mode(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.andl.validate()?;
        if self.n_symbols == 0 {
            return Err(Error::Config("n_symbols must be >= 1".into()));
        }
        for (v, name) in [(self.thermal_variance(), "sigma_w2"), (self.impulse_variance(), "sigma_i2")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("threshold must be >= 0, got {t}")));
            }
        }
        self.impulse_spec()?;
        Ok(())
    }

    /// Analog samples per chip: the ratio of the analog-rate white-noise
    /// variance to its share in the signal band.
    fn in_band_scale(&self) -> f64 {
        self.ofdm.analog_samples_per_chip() as f64
    }

    /// Analog-rate thermal variance. Eb/N0 is referenced to the in-band
    /// noise so that uncoded BPSK gives `Q(sqrt(2 Eb/N0))`.
    pub fn thermal_variance(&self) -> f64 {
        match self.thermal {
            ThermalLevel::Variance(v) => v,
            ThermalLevel::EbN0Db(db) => self.in_band_scale() / 10f64.powf(db / 10.0),
        }
    }

    /// Analog-rate burst variance; SIR is referenced in-band like Eb/N0.
    pub fn impulse_variance(&self) -> f64 {
        match self.impulse {
            ImpulseLevel::Variance(v) => v,
            ImpulseLevel::SirDb(db) => sir_to_burst_variance(db, 1.0) * self.in_band_scale(),
        }
    }

    pub fn ebn0_db(&self) -> Option<f64> {
        if let ThermalLevel::EbN0Db(db) = self.thermal {
            return Some(db);
        }
        let v = self.thermal_variance();
        (v > 0.0).then(|| 10.0 * (self.in_band_scale() / v).log10())
    }

    pub fn sir_db(&self) -> Option<f64> {
        if let ImpulseLevel::SirDb(db) = self.impulse {
            return (self.lambda_hz > 0.0).then_some(db);
        }
        let v = self.impulse_variance();
        (v > 0.0 && self.lambda_hz > 0.0).then(|| 10.0 * (self.in_band_scale() / v).log10())
    }

    pub fn impulse_spec(&self) -> Result<ImpulseNoiseSpec> {
        if self.lambda_hz == 0.0 || self.impulse_variance() == 0.0 {
            return Ok(ImpulseNoiseSpec { burst_duration_s: self.tau_as_s.max(f64::MIN_POSITIVE), ..ImpulseNoiseSpec::none() });
        }
        ImpulseNoiseSpec::new(self.lambda_hz, self.tau_as_s, self.impulse_variance())
    }

    fn frames(&self) -> Vec<usize> {
        let full = self.n_symbols / FRAME_SYMBOLS;
        let rest = self.n_symbols % FRAME_SYMBOLS;
        let mut v = vec![FRAME_SYMBOLS; full];
        if rest > 0 {
            v.push(rest);
        }
        v
    }

    pub fn n_bits(&self) -> u64 {
        (self.n_symbols * self.ofdm.n_subcarriers) as u64
    }

    /// Analytic-model inputs at the analog rate: unit signal variance, the
    /// analog-rate noise variances, and `alpha0` at the `(1 - zeta)`
    /// quantile of the impulse-free component so that `p_{0,1} = 1 - zeta`.
    pub fn analytic_inputs(&self) -> Result<(MixtureParams, QuantizationGrid)> {
        let eps = if self.sir_db().is_some() { (self.lambda_hz * self.tau_as_s).min(1.0) } else { 0.0 };
        let mix = MixtureParams::new(eps, 1.0, self.thermal_variance(), self.impulse_variance())?;
        let alpha0 = crate::andl::alpha_from_sigma(mix.sigma1_sq().sqrt(), self.andl.zeta)?;
        let delta_alpha = self.andl.delta_alpha;
        let xmax = 8.0 * mix.sigma2_sq().sqrt();
        let n = self
            .andl
            .n_levels
            .unwrap_or_else(|| QuantizationGrid::levels_to_cover(alpha0, delta_alpha, self.andl.kappa, xmax))
            .max(1);
        let dt_s = self
            .analytic_dt_s
            .unwrap_or(1.0 / (2.0 * self.ofdm.bandwidth_hz * (1.0 + self.ofdm.rolloff)));
        let grid = QuantizationGrid {
            alpha0,
            delta_alpha,
            n,
            kappa: self.andl.kappa,
            tau0_s: self.andl.tau0_s,
            dt_s,
            impulse_dt_s: self.tau_as_s,
        };
        Ok((mix, grid))
    }

    /// Analytic powers with the noise referred to the signal band, so the
    /// SNR compares with the detected-symbol SNR of the simulation.
    pub fn analytic(&self) -> Result<PowerBreakdown> {
        let (mix, grid) = self.analytic_inputs()?;
        Ok(analytic::residual_powers(&mix, &grid)?.referred_to_band(self.in_band_scale()))
    }

    /// FNV-1a hash of the canonical JSON form of the scenario.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serialises");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

fn andl_mode(m: Mitigation) -> AndlMode {
    match m {
        Mitigation::AndlExact => AndlMode::Exact,
        Mitigation::AndlSimplified => AndlMode::Simplified,
        Mitigation::AndlFilterBank => AndlMode::FilterBank,
        _ => AndlMode::Linear,
    }
}

/// The modified matched filter undoes the linear-regime lowpass, so it is
/// the default receiver wherever a lowpass precedes the ADC.
pub fn default_rx_filter(m: Mitigation) -> RxFilter {
    if m.is_andl() || m == Mitigation::Linear {
        RxFilter::ModifiedMatched
    } else {
        RxFilter::Matched
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for `component` in frame `frame` under `master`.
pub fn stream_seed(master: u64, frame: u64, component: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ frame) ^ component)
}

fn stream(master: u64, frame: usize, component: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, frame as u64, component))
}

/// Transmitted data and received analog waveform of one frame.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub bits: BitFrame,
    pub tx_symbols: Vec<C64>,
    pub clean: ComplexEnvelope,
    pub received: ComplexEnvelope,
    pub n_bursts: usize,
}

impl FrontEnd {
    /// Hash of the received samples, for checking common random numbers.
    pub fn noise_fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.received.len() * 16);
        for (r, c) in self.received.samples().iter().zip(self.clean.samples()) {
            let d = r - c;
            bytes.extend_from_slice(&d.re.to_le_bytes());
            bytes.extend_from_slice(&d.im.to_le_bytes());
        }
        fnv1a(&bytes)
    }
}

/// Builds frame `frame` (holding `n_sym` OFDM symbols) of scenario `s`.
pub fn frame_front_end(s: &SimScenario, frame: usize, n_sym: usize) -> Result<FrontEnd> {
    let cfg = &s.ofdm;
    let mut rng_bits = stream(s.seed, frame, STREAM_BITS);
    let bits = BitFrame::new((0..n_sym * cfg.n_subcarriers).map(|_| rng_bits.random::<bool>() as u8).collect())?;
    let tx_symbols = modulate_bits(&bits, cfg)?;
    let clean = ofdm_modulate(&tx_symbols, cfg)?;
    let rate = clean.sample_rate_hz();
    let n = clean.len();
    let mut received: Vec<C64> = clean.samples().to_vec();
    let thermal = ThermalNoiseSpec::new(s.thermal_variance())?;
    if thermal.variance > 0.0 {
        let w = gen_awgn(&thermal, n, rate, &mut stream(s.seed, frame, STREAM_THERMAL))?;
        received.iter_mut().zip(w.samples()).for_each(|(r, v)| *r += v);
    }
    let spec = s.impulse_spec()?;
    let mut n_bursts = 0;
    if spec.arrival_rate_hz > 0.0 && spec.burst_variance > 0.0 {
        let imp = gen_impulsive_gated(&spec, n, rate, &mut stream(s.seed, frame, STREAM_IMPULSE))?;
        received.iter_mut().zip(imp.envelope.samples()).for_each(|(r, v)| *r += v);
        n_bursts = imp.n_bursts;
    }
    Ok(FrontEnd { bits, tx_symbols, clean, received: ComplexEnvelope::new(rate, received)?, n_bursts })
}

/// Running sums for the output SNR of received against sent symbols.
///
/// Each subcarrier gets its own least-squares complex gain, so fixed linear
/// distortion (the residual ripple of the receive filter) counts as signal
/// and only the random part counts as noise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnrSums {
    cross: Vec<C64>,
    ref_power: Vec<f64>,
    rx_power: Vec<f64>,
}

impl SnrSums {
    pub fn new(n_subcarriers: usize) -> Self {
        Self { cross: vec![C64::new(0.0, 0.0); n_subcarriers], ref_power: vec![0.0; n_subcarriers], rx_power: vec![0.0; n_subcarriers] }
    }

    /// Adds whole OFDM symbols; `rx` and `reference` hold `N` values per symbol.
    pub fn add(&mut self, rx: &[C64], reference: &[C64]) {
        let n = self.cross.len();
        for (i, (p, r)) in rx.iter().zip(reference).enumerate() {
            let k = i % n;
            self.cross[k] += p * r.conj();
            self.ref_power[k] += r.norm_sqr();
            self.rx_power[k] += p.norm_sqr();
        }
    }

    pub fn merge(mut self, o: &SnrSums) -> SnrSums {
        if self.cross.is_empty() {
            return o.clone();
        }
        for k in 0..self.cross.len().min(o.cross.len()) {
            self.cross[k] += o.cross[k];
            self.ref_power[k] += o.ref_power[k];
            self.rx_power[k] += o.rx_power[k];
        }
        self
    }

    /// SNR in dB, capped at [`SNR_CAP_DB`].
    pub fn snr_db(&self) -> f64 {
        let (mut signal, mut noise) = (0.0, 0.0);
        for k in 0..self.cross.len() {
            if self.ref_power[k] > 0.0 {
                let sk = self.cross[k].norm_sqr() / self.ref_power[k];
                signal += sk;
                noise += (self.rx_power[k] - sk).max(0.0);
            }
        }
        if signal <= 0.0 {
            return f64::NAN;
        }
        if noise <= signal * 10f64.powf(-SNR_CAP_DB / 10.0) {
            SNR_CAP_DB
        } else {
            10.0 * (signal / noise).log10()
        }
    }
}

#[derive(Debug, Clone, Default)]
struct FrameStats {
    errors: u64,
    bits: u64,
    snr: SnrSums,
}

impl FrameStats {
    fn merge(self, o: &FrameStats) -> FrameStats {
        FrameStats { errors: self.errors + o.errors, bits: self.bits + o.bits, snr: self.snr.merge(&o.snr) }
    }
}

/// Receiver state shared by all frames of a run.
struct Receiver {
    cfg: OfdmConfig,
    mf_taps: Vec<f64>,
    transform: OfdmTransform,
}

impl Receiver {
    fn new(s: &SimScenario) -> Self {
        let mf_taps = match s.rx_filter {
            RxFilter::Matched => matched_filter_taps(&s.ofdm),
            RxFilter::ModifiedMatched => modified_matched_filter_taps(&s.ofdm, s.andl.tau0_s),
        };
        Self { cfg: s.ofdm.clone(), mf_taps, transform: OfdmTransform::new(s.ofdm.n_subcarriers) }
    }

    /// Matched filtering, chip sampling, DFT and hard decisions on an
    /// ADC-rate record.
    fn detect(&self, adc: &ComplexEnvelope, fe: &FrontEnd) -> Result<FrameStats> {
        let mf = ComplexEnvelope::from_filtered(adc.sample_rate_hz(), fir_centered(adc.samples(), &self.mf_taps));
        let chips = sample_chips(&mf, fe.tx_symbols.len(), &self.cfg)?;
        let symbols = self.transform.to_freq(chips.samples())?;
        let rx_bits = demap_bits(&symbols);
        let errors = fe.bits.bits().iter().zip(rx_bits.bits()).filter(|(a, b)| a != b).count() as u64;
        let mut snr = SnrSums::new(self.cfg.n_subcarriers);
        snr.add(&symbols, &fe.tx_symbols);
        Ok(FrameStats { errors, bits: fe.bits.len() as u64, snr })
    }
}

/// Runs the limiter of mode `mode` over `x`, re-estimating the resolution
/// parameter once per OFDM symbol from the highpass residual. The value
/// estimated on one symbol drives the next; the first symbol uses its own.
pub fn andl_adaptive(x: &ComplexEnvelope, s: &SimScenario, mode: AndlMode) -> Result<ComplexEnvelope> {
    let a = &s.andl;
    if mode == AndlMode::Linear {
        return linear_lowpass(x, a.tau0_s);
    }
    let seg = s.ofdm.n_subcarriers * s.ofdm.analog_samples_per_chip();
    let z = first_order_highpass(x, a.tau0_s)?;
    let alphas: Vec<f64> = z
        .samples()
        .chunks(seg)
        .map(|w| resolution_from_residual(w, a.zeta, SigmaEstimator::RobustMedian).map(|r| r.alpha))
        .collect::<Result<_>>()?;
    let mut lim = Limiter::new(a.tau0_s, x.sample_rate_hz())?;
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for (j, (xs, os)) in x.samples().chunks(seg).zip(out.chunks_mut(seg)).enumerate() {
        let alpha = alphas[j.saturating_sub(1)];
        match mode {
            AndlMode::Exact => lim.run(xs, TauLaw::Exact { alpha }, os)?,
            AndlMode::Simplified => lim.run(xs, TauLaw::Simplified { alpha0: alpha, kappa: a.kappa }, os)?,
            AndlMode::FilterBank => {
                let bank = bank_for_record(xs, alpha, a)?;
                lim.run(xs, TauLaw::Bank { bank: &bank, kappa: a.kappa }, os)?
            }
            AndlMode::Linear => unreachable!(),
        }
    }
    Ok(ComplexEnvelope::from_filtered(x.sample_rate_hz(), out))
}

/// Analog-domain processing of method `m` followed by the ADC.
pub fn mitigate_to_adc(received: &ComplexEnvelope, s: &SimScenario, m: Mitigation) -> Result<ComplexEnvelope> {
    let analog = match m {
        Mitigation::Linear => linear_lowpass(received, s.andl.tau0_s)?,
        m if m.is_andl() => andl_adaptive(received, s, andl_mode(m))?,
        _ => received.clone(),
    };
    adc_sample(&analog, &s.ofdm)
}

/// One result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub fingerprint: String,
    pub method: Mitigation,
    pub ebn0_db: Option<f64>,
    pub sir_db: Option<f64>,
    pub lambda_hz: f64,
    pub tau_as_s: f64,
    pub ber: BerRecord,
    pub snr_out_db: f64,
    pub analytic: Option<PowerBreakdown>,
    pub threshold: Option<f64>,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn snr_analytic_db(&self) -> Option<f64> {
        self.analytic.map(|a| a.snr_avg_db()).filter(|v| v.is_finite())
    }

    pub fn flat(&self) -> FlatRecord {
        FlatRecord {
            method: self.method.name().to_string(),
            ebn0_db: self.ebn0_db,
            sir_db: self.sir_db,
            lambda_hz: self.lambda_hz,
            tau_as_s: self.tau_as_s,
            n_bits: self.ber.bits,
            n_errors: self.ber.errors,
            ber: self.ber.ber,
            ber_ci95: self.ber.ci95,
            snr_out_db: self.snr_out_db,
            snr_analytic_db: self.snr_analytic_db(),
            ber_bound: self.analytic.map(|a| a.ber_bound),
            seed: self.seed,
        }
    }
}

/// Blanking/clipping threshold search over the ADC records of every frame.
fn search_threshold(
    method: ThresholdMethod,
    grid: &[f64],
    adc: &[ComplexEnvelope],
    fronts: &[FrontEnd],
    rx: &Receiver,
) -> Result<ThresholdSpec> {
    let search = baseline::optimize_threshold(method, grid, |t| {
        let spec = ThresholdSpec { value: t, method };
        let mut errors = 0;
        let mut bits = 0;
        for (a, fe) in adc.iter().zip(fronts) {
            let st = rx.detect(&spec.apply(a)?, fe)?;
            errors += st.errors;
            bits += st.bits;
        }
        Ok(BerRecord::from_counts(errors, bits))
    })?;
    log::debug!("{method:?} threshold {:.4} with BER {:.3e}", search.best.value, search.best_ber.ber);
    Ok(search.best)
}

/// Runs every method in `methods` on the same transmitted bits and noise.
/// `s.mitigation` is ignored.
pub fn run_methods(s: &SimScenario, methods: &[Mitigation]) -> Result<Vec<ResultRecord>> {
    s.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no mitigation methods requested".into()));
    }
    let start = Instant::now();
    let frames = s.frames();
    let rx = Receiver::new(s);
    let direct: Vec<Mitigation> =
        methods.iter().copied().filter(|m| m.threshold_method().is_none() || s.threshold.is_some()).collect();
    let searched: Vec<Mitigation> =
        methods.iter().copied().filter(|m| m.threshold_method().is_some() && s.threshold.is_none()).collect();
    let keep_adc = !searched.is_empty();

    struct FrameOut {
        stats: Vec<FrameStats>,
        kept: Option<(FrontEnd, ComplexEnvelope)>,
    }

    let per_frame: Vec<FrameOut> = frames
        .par_iter()
        .enumerate()
        .map(|(f, &n_sym)| {
            let fe = frame_front_end(s, f, n_sym)?;
            let need_plain_adc = keep_adc || direct.iter().any(|m| m.works_on_adc_output());
            let plain_adc = if need_plain_adc { Some(adc_sample(&fe.received, &s.ofdm)?) } else { None };
            let mut stats = Vec::with_capacity(direct.len());
            for &m in &direct {
                let adc = match m {
                    Mitigation::None => plain_adc.clone().expect("computed above"),
                    Mitigation::Blanking | Mitigation::Clipping => {
                        let spec = ThresholdSpec::new(s.threshold.expect("fixed threshold"), m.threshold_method().unwrap())?;
                        spec.apply(plain_adc.as_ref().expect("computed above"))?
                    }
                    _ => mitigate_to_adc(&fe.received, s, m)?,
                };
                stats.push(rx.detect(&adc, &fe)?);
            }
            let kept = if keep_adc { Some((fe, plain_adc.expect("computed above"))) } else { None };
            Ok(FrameOut { stats, kept })
        })
        .collect::<Result<_>>()?;

    let mut results: Vec<(Mitigation, FrameStats, Option<f64>)> = direct
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let total = per_frame.iter().fold(FrameStats::default(), |acc, fo| acc.merge(&fo.stats[i]));
            (m, total, s.threshold.filter(|_| m.threshold_method().is_some()))
        })
        .collect();

    if keep_adc {
        let (fronts, adc): (Vec<FrontEnd>, Vec<ComplexEnvelope>) =
            per_frame.into_iter().map(|fo| fo.kept.expect("kept")).unzip();
        // grid anchored on the RMS of the first frame's ADC record
        let sigma_x = adc[0].power().sqrt();
        let grid = baseline::default_grid(sigma_x.max(f64::MIN_POSITIVE));
        for &m in &searched {
            let best = search_threshold(m.threshold_method().unwrap(), &grid, &adc, &fronts, &rx)?;
            let total = adc
                .par_iter()
                .zip(&fronts)
                .map(|(a, fe)| rx.detect(&best.apply(a)?, fe))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(FrameStats::default(), |a, b| a.merge(&b));
            results.push((m, total, Some(best.value)));
        }
    }

    let analytic = if methods.iter().any(|m| m.is_andl()) {
        Some(s.analytic()?)
    } else {
        None
    };
    let wall = start.elapsed().as_secs_f64();
    let mut records: Vec<ResultRecord> = results
        .into_iter()
        .map(|(m, st, threshold)| {
            let cell = s.clone().with_mitigation(m);
            ResultRecord {
                fingerprint: cell.fingerprint(),
                method: m,
                ebn0_db: s.ebn0_db(),
                sir_db: s.sir_db(),
                lambda_hz: s.lambda_hz,
                tau_as_s: s.tau_as_s,
                ber: BerRecord::from_counts(st.errors, st.bits),
                snr_out_db: st.snr.snr_db(),
                analytic: if m.is_andl() { analytic } else { None },
                threshold,
                seed: s.seed,
                wall_time_s: wall,
            }
        })
        .collect();
    records.sort_by_key(|r| methods.iter().position(|&m| m == r.method));
    Ok(records)
}

pub fn run_scenario(s: &SimScenario) -> Result<ResultRecord> {
    let mut v = run_methods(s, &[s.mitigation])?;
    Ok(v.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    EbN0,
    Sir,
    Lambda,
    TauAs,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalise_name(s).as_str() {
            "ebn0" | "ebn0db" => Ok(SweepAxis::EbN0),
            "sir" | "sirdb" => Ok(SweepAxis::Sir),
            "lambda" | "lambdahz" => Ok(SweepAxis::Lambda),
            "tauas" | "tauass" => Ok(SweepAxis::TauAs),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (ebn0, sir, lambda, tau_as)"))),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, base: &SimScenario, v: f64) -> SimScenario {
        let mut s = base.clone();
        match self {
            SweepAxis::EbN0 => s.thermal = ThermalLevel::EbN0Db(v),
            SweepAxis::Sir => s.impulse = ImpulseLevel::SirDb(v),
            SweepAxis::Lambda => s.lambda_hz = v,
            SweepAxis::TauAs => s.tau_as_s = v,
        }
        s
    }
}

/// One record per (value, method). All methods at a value share bits and
/// noise; the master seed is the same at every value.
pub fn sweep(base: &SimScenario, axis: SweepAxis, values: &[f64], methods: &[Mitigation]) -> Result<Vec<ResultRecord>> {
    if values.is_empty() || methods.is_empty() {
        return Err(Error::Config("sweep needs at least one value and one method".into()));
    }
    let mut out = Vec::with_capacity(values.len() * methods.len());
    for &v in values {
        out.extend(run_methods(&axis.apply(base, v), methods)?);
    }
    // stable: values keep their given order within a method
    out.sort_by_key(|r| methods.iter().position(|&m| m == r.method));
    Ok(out)
}

/// Flat row of the result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRecord {
    pub method: String,
    pub ebn0_db: Option<f64>,
    pub sir_db: Option<f64>,
    pub lambda_hz: f64,
    pub tau_as_s: f64,
    pub n_bits: u64,
    pub n_errors: u64,
    pub ber: f64,
    pub ber_ci95: f64,
    pub snr_out_db: f64,
    pub snr_analytic_db: Option<f64>,
    pub ber_bound: Option<f64>,
    pub seed: u64,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "method",
    "ebn0_db",
    "sir_db",
    "lambda_hz",
    "tau_as_s",
    "n_bits",
    "n_errors",
    "ber",
    "ber_ci95",
    "snr_out_db",
    "snr_analytic_db",
    "ber_bound",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv, json)"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(records: &[ResultRecord], format: OutputFormat, mut w: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to emit".into()));
    }
    let flat: Vec<FlatRecord> = records.iter().map(ResultRecord::flat).collect();
    match format {
        OutputFormat::Csv => {
            writeln!(w, "{}", CSV_COLUMNS.join(","))?;
            for r in &flat {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.method,
                    opt(r.ebn0_db),
                    opt(r.sir_db),
                    r.lambda_hz,
                    r.tau_as_s,
                    r.n_bits,
                    r.n_errors,
                    r.ber,
                    r.ber_ci95,
                    r.snr_out_db,
                    opt(r.snr_analytic_db),
                    opt(r.ber_bound),
                    r.seed
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &flat).map_err(|e| Error::Serialize(e.to_string()))?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn emit_results(records: &[ResultRecord], format: OutputFormat, path: &Path) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_results(records, format, f)
}

/// Parses a result file written by [`write_results`].
pub fn read_results<R: BufRead>(r: R, format: OutputFormat) -> Result<Vec<FlatRecord>> {
    match format {
        OutputFormat::Json => serde_json::from_reader(r).map_err(|e| Error::Serialize(e.to_string())),
        OutputFormat::Csv => {
            let mut lines = r.lines();
            let header = lines.next().ok_or_else(|| Error::Serialize("empty CSV".into()))??;
            if header.trim() != CSV_COLUMNS.join(",") {
                return Err(Error::Serialize(format!("unexpected CSV header `{header}`")));
            }
            let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Serialize(format!("bad number `{s}`"))) };
            let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Serialize(format!("bad integer `{s}`"))) };
            let optn = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
            let mut out = Vec::new();
            for line in lines {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let c: Vec<&str> = line.split(',').collect();
                if c.len() != CSV_COLUMNS.len() {
                    return Err(Error::Serialize(format!("expected {} fields, got {}", CSV_COLUMNS.len(), c.len())));
                }
                out.push(FlatRecord {
                    method: c[0].to_string(),
                    ebn0_db: optn(c[1])?,
                    sir_db: optn(c[2])?,
                    lambda_hz: num(c[3])?,
                    tau_as_s: num(c[4])?,
                    n_bits: int(c[5])?,
                    n_errors: int(c[6])?,
                    ber: num(c[7])?,
                    ber_ci95: num(c[8])?,
                    snr_out_db: num(c[9])?,
                    snr_analytic_db: optn(c[10])?,
                    ber_bound: optn(c[11])?,
                    seed: int(c[12])?,
                });
            }
            Ok(out)
        }
    }
}

/// Scenario file as written by users. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_subcarriers: Option<usize>,
    bandwidth_hz: Option<f64>,
    rolloff: Option<f64>,
    oversample_factor: Option<usize>,
    n_symbols: Option<usize>,
    ebn0_db: Option<f64>,
    sigma_w2: Option<f64>,
    sir_db: Option<f64>,
    sigma_i2: Option<f64>,
    lambda_hz: Option<f64>,
    tau_as_s: Option<f64>,
    mitigation: Option<String>,
    rx_filter: Option<String>,
    tau0_s: Option<f64>,
    zeta: Option<f64>,
    kappa: Option<f64>,
    delta_alpha: Option<f64>,
    seed: Option<u64>,
}

/// Default number of OFDM symbols per cell.
pub const DEFAULT_N_SYMBOLS: usize = 200;

/// Parses a TOML scenario.
pub fn parse_config_str(text: &str) -> Result<SimScenario> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let need = |v: Option<f64>, k: &str| v.ok_or_else(|| Error::Config(format!("missing required key `{k}`")));
    let n_subcarriers = raw.n_subcarriers.ok_or_else(|| Error::Config("missing required key `n_subcarriers`".into()))?;
    let bandwidth_hz = need(raw.bandwidth_hz, "bandwidth_hz")?;
    let defaults = OfdmConfig::default();
    let ofdm = OfdmConfig {
        n_subcarriers,
        bandwidth_hz,
        rolloff: raw.rolloff.unwrap_or(defaults.rolloff),
        oversample_factor: raw.oversample_factor.unwrap_or(defaults.oversample_factor),
        ..defaults
    };
    let thermal = match (raw.ebn0_db, raw.sigma_w2) {
        (Some(_), Some(_)) => return Err(Error::Config("`ebn0_db` and `sigma_w2` are mutually exclusive".into())),
        (Some(db), None) => ThermalLevel::EbN0Db(db),
        (None, Some(v)) => ThermalLevel::Variance(v),
        (None, None) => return Err(Error::Config("missing required key `ebn0_db` or `sigma_w2`".into())),
    };
    let impulse = match (raw.sir_db, raw.sigma_i2) {
        (Some(_), Some(_)) => return Err(Error::Config("`sir_db` and `sigma_i2` are mutually exclusive".into())),
        (Some(db), None) => Some(ImpulseLevel::SirDb(db)),
        (None, Some(v)) => Some(ImpulseLevel::Variance(v)),
        (None, None) => None,
    };
    let (impulse, lambda_hz, tau_as_s) = match impulse {
        Some(level) => (level, need(raw.lambda_hz, "lambda_hz")?, need(raw.tau_as_s, "tau_as_s")?),
        None => {
            if raw.lambda_hz.is_some() || raw.tau_as_s.is_some() {
                return Err(Error::Config("`lambda_hz`/`tau_as_s` given without `sir_db` or `sigma_i2`".into()));
            }
            (ImpulseLevel::Variance(0.0), 0.0, 1e-6)
        }
    };
    let mitigation: Mitigation = raw
        .mitigation
        .as_deref()
        .ok_or_else(|| Error::Config("missing required key `mitigation`".into()))?
        .parse()?;
    let rx_filter = match raw.rx_filter.as_deref() {
        Some(s) => s.parse()?,
        None => default_rx_filter(mitigation),
    };
    let base = AndlConfig::for_bandwidth(bandwidth_hz, andl_mode(mitigation));
    let andl = AndlConfig {
        tau0_s: raw.tau0_s.unwrap_or(base.tau0_s),
        zeta: raw.zeta.unwrap_or(base.zeta),
        kappa: raw.kappa.unwrap_or(base.kappa),
        delta_alpha: raw.delta_alpha.unwrap_or(base.delta_alpha),
        ..base
    };
    let s = SimScenario {
        ofdm,
        thermal,
        impulse,
        lambda_hz,
        tau_as_s,
        mitigation,
        andl,
        rx_filter,
        n_symbols: raw.n_symbols.unwrap_or(DEFAULT_N_SYMBOLS),
        seed: raw.seed.unwrap_or(1),
        threshold: None,
        analytic_dt_s: None,
    };
    s.validate()?;
    Ok(s)
}

pub fn parse_config(path: &Path) -> Result<SimScenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text)
}
