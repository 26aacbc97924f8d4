//! Scale-invariant signal-to-distortion ratio and corpus aggregation.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Residual guard, relative to the target energy so the score stays scale
/// invariant. A perfect estimate lands exactly on the cap.
pub const RESIDUAL_EPS: f64 = 1e-10;
/// Reported values are capped here.
pub const MAX_SI_SDR_DB: f64 = 100.0;
/// Reference RMS below which an example is excluded from aggregation.
pub const SILENCE_RMS: f64 = 1e-5;
const SILENT_ENERGY: f64 = 1e-20;

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// SI-SDR of `estimate` against `reference`, in dB, without mean removal.
///
/// The reference is scaled by `alpha = <e, r> / |r|^2` before measuring the
/// residual, so any gain applied to the estimate is ignored.
pub fn si_sdr(estimate: &[f32], reference: &[f32]) -> Result<f64> {
    if estimate.len() != reference.len() {
        bail!(
            InvalidArgument,
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        );
    }
    let ref_energy = dot(reference, reference);
    if ref_energy <= SILENT_ENERGY {
        bail!(UndefinedMetric, "reference is silent");
    }
    if dot(estimate, estimate) <= SILENT_ENERGY {
        bail!(UndefinedMetric, "estimate is silent");
    }
    let alpha = dot(estimate, reference) / ref_energy;
    let mut target = 0.0;
    let mut residual = 0.0;
    for (&e, &r) in estimate.iter().zip(reference) {
        let t = alpha * f64::from(r);
        let d = f64::from(e) - t;
        target += t * t;
        residual += d * d;
    }
    if target <= 0.0 {
        // estimate orthogonal to the reference
        bail!(UndefinedMetric, "estimate is orthogonal to the reference");
    }
    let db = -10.0 * libm::log10(residual / target + RESIDUAL_EPS);
    Ok(db.min(MAX_SI_SDR_DB))
}

/// Improvement of the estimate over the unprocessed input, in dB.
pub fn si_sdri(estimate: &[f32], noisy_input: &[f32], reference: &[f32]) -> Result<f64> {
    Ok(si_sdr(estimate, reference)? - si_sdr(noisy_input, reference)?)
}

pub fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    libm::sqrt(dot(x, x) / x.len() as f64)
}

pub fn is_silent(reference: &[f32]) -> bool {
    rms(reference) < SILENCE_RMS
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Per-example measurements in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleScore {
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub si_sdri: f64,
}

/// Scores one example; `None` when the reference is silent.
pub fn score_example(estimate: &[f32], noisy_input: &[f32], reference: &[f32]) -> Result<Option<ExampleScore>> {
    if is_silent(reference) {
        return Ok(None);
    }
    let si_sdr_in = si_sdr(noisy_input, reference)?;
    let si_sdr_out = si_sdr(estimate, reference)?;
    Ok(Some(ExampleScore {
        si_sdr_in,
        si_sdr_out,
        si_sdri: si_sdr_out - si_sdr_in,
    }))
}

pub fn mean_improvement(scores: &[ExampleScore]) -> (f64, f64) {
    let v: Vec<f64> = scores.iter().map(|s| s.si_sdri).collect();
    mean_std(&v)
}
