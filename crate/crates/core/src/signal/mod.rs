//! Deterministic conditioning of microphone and accelerometer signals.

mod filter;
mod normalize;
mod resample;

pub use filter::{high_pass, Biquad};
pub use normalize::{normalize, quantile, NORMALIZE_HEADROOM, NORMALIZE_QUANTILE};
pub use resample::{band_limit, resample, Resampler};

/// Cutoff of the DC-blocking filter applied to every recording.
pub const HIGH_PASS_CUTOFF_HZ: f64 = 20.0;
