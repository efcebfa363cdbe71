//! Baseband OFDM link simulator for impulsive-noise mitigation with an
//! adaptive nonlinear differential limiter (ANDL) placed ahead of the ADC.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`signal`]: BPSK OFDM transmitter, RRC shaping, ADC front end and
//!   (modified) matched filtering;
//! * [`noise`]: thermal and Poisson-gated impulsive noise;
//! * [`andl`]: the limiter, its approximations and resolution calibration;
//! * [`baseline`]: blanking and clipping;
//! * [`analytic`]: the Gaussian-mixture SNR model and BER bound;
//! * [`metrics`]: BER, SNR, PSD and histograms;
//! * [`sim`]: scenario configuration, Monte Carlo runs and sweeps.

pub mod analytic;
pub mod andl;
pub mod baseline;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod signal;
pub mod selftest;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use signal::{ComplexEnvelope, C64};
