//! Additive corruption of clean speech with an interferer.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{bail, Result};
use crate::rng::below;
use crate::waveform::Waveform;

pub fn db_to_gain(db: f32) -> f32 {
    libm::powf(10.0, db / 20.0)
}

/// Fits `interferer` to `len` samples: a window at `offset` when it is
/// longer, repetitions from the start when it is shorter.
pub fn fit_to_len(interferer: &[f32], len: usize, offset: usize) -> Vec<f32> {
    let n = interferer.len();
    assert!(n > 0, "interferer must be non-empty");
    if n >= len {
        let start = offset.min(n - len);
        interferer[start..start + len].to_vec()
    } else {
        interferer.iter().copied().cycle().take(len).collect()
    }
}

/// Result of [`mix_parts`]: the mixture plus what went into it.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub noisy: Waveform,
    /// The interferer after cropping or tiling, before the gain.
    pub interferer: Waveform,
    pub gain: f32,
}

/// `clean + 10^(gain_db / 20) * fitted interferer`, no clipping.
///
/// Multi-channel clean signals take interferer channel `i % n`.
pub fn mix_parts(clean: &Waveform, interferer: &Waveform, gain_db: f32, rng: &mut impl RngCore) -> Result<Mixture> {
    if clean.sample_rate() != interferer.sample_rate() {
        bail!(
            InvalidArgument,
            "sample rate mismatch: clean {} Hz, interferer {} Hz",
            clean.sample_rate(),
            interferer.sample_rate()
        );
    }
    if interferer.is_empty() {
        bail!(InvalidArgument, "interferer is empty");
    }
    if !gain_db.is_finite() {
        bail!(InvalidArgument, "mixing gain must be finite");
    }
    let len = clean.len();
    let spare = interferer.len().saturating_sub(len);
    let offset = if spare > 0 { below(rng, spare + 1) } else { 0 };
    let gain = db_to_gain(gain_db);
    let fitted: Vec<Vec<f32>> = (0..clean.num_channels())
        .map(|c| fit_to_len(interferer.channel(c % interferer.num_channels()), len, offset))
        .collect();
    let noisy = clean
        .channels()
        .iter()
        .zip(&fitted)
        .map(|(c, n)| c.iter().zip(n).map(|(a, b)| a + gain * b).collect())
        .collect();
    Ok(Mixture {
        noisy: Waveform::new(noisy, clean.sample_rate())?,
        interferer: Waveform::new(fitted, clean.sample_rate())?,
        gain,
    })
}

pub fn mix(clean: &Waveform, interferer: &Waveform, gain_db: f32, rng: &mut impl RngCore) -> Result<Waveform> {
    Ok(mix_parts(clean, interferer, gain_db, rng)?.noisy)
}
