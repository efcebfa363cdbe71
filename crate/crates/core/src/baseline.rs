//! Memoryless blanking and clipping with an exhaustive threshold search.

use crate::error::{Error, Result};
use crate::metrics::BerRecord;
use crate::signal::{ComplexEnvelope, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdMethod {
    Blanking,
    Clipping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub value: f64,
    pub method: ThresholdMethod,
}

impl ThresholdSpec {
    pub fn new(value: f64, method: ThresholdMethod) -> Result<Self> {
        check_threshold(value)?;
        Ok(Self { value, method })
    }

    pub fn apply(&self, sig: &ComplexEnvelope) -> Result<ComplexEnvelope> {
        match self.method {
            ThresholdMethod::Blanking => blank(sig, self.value),
            ThresholdMethod::Clipping => clip(sig, self.value),
        }
    }
}

fn check_threshold(thr: f64) -> Result<()> {
    if thr >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("threshold must be >= 0, got {thr}")))
    }
}

/// Zeroes every sample whose magnitude exceeds `thr`.
pub fn blank(sig: &ComplexEnvelope, thr: f64) -> Result<ComplexEnvelope> {
    check_threshold(thr)?;
    let y = sig.samples().iter().map(|&z| if z.norm() <= thr { z } else { C64::new(0.0, 0.0) }).collect();
    Ok(ComplexEnvelope::from_filtered(sig.sample_rate_hz(), y))
}

/// Clamps magnitudes to `thr`, keeping the phase.
pub fn clip(sig: &ComplexEnvelope, thr: f64) -> Result<ComplexEnvelope> {
    check_threshold(thr)?;
    let y = sig
        .samples()
        .iter()
        .map(|&z| {
            let m = z.norm();
            if m <= thr {
                z
            } else {
                z * (thr / m)
            }
        })
        .collect();
    Ok(ComplexEnvelope::from_filtered(sig.sample_rate_hz(), y))
}

/// `points` logarithmically spaced thresholds from `lo_mult * sigma_x` to
/// `hi_mult * sigma_x`.
pub fn log_grid(sigma_x: f64, lo_mult: f64, hi_mult: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo_mult * sigma_x],
        _ => {
            let (a, b) = (lo_mult.ln(), hi_mult.ln());
            (0..points)
                .map(|i| sigma_x * (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}

/// Default search grid: 40 points from 0.5 to 8 times `sigma_x`.
pub fn default_grid(sigma_x: f64) -> Vec<f64> {
    log_grid(sigma_x, 0.5, 8.0, 40)
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub best: ThresholdSpec,
    pub best_ber: BerRecord,
    /// `(threshold, ber)` for every grid point, in grid order.
    pub evaluated: Vec<(f64, BerRecord)>,
}

/// Evaluates `eval` at every grid threshold and returns the one with the
/// fewest errors; ties go to the smaller threshold. Grid points run in
/// parallel, so `eval` must be deterministic in its argument.
pub fn optimize_threshold<F>(method: ThresholdMethod, grid: &[f64], eval: F) -> Result<ThresholdSearch>
where
    F: Fn(f64) -> Result<BerRecord> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    for &t in grid {
        check_threshold(t)?;
    }
    let evaluated: Vec<(f64, BerRecord)> =
        grid.par_iter().map(|&t| eval(t).map(|b| (t, b))).collect::<Result<_>>()?;
    let &(value, best_ber) = evaluated
        .iter()
        .min_by(|a, b| a.1.ber.total_cmp(&b.1.ber).then(a.0.total_cmp(&b.0)))
        .expect("nonempty grid");
    Ok(ThresholdSearch { best: ThresholdSpec { value, method }, best_ber, evaluated })
}
