use alloc::vec::Vec;

use crate::waveform::Waveform;

pub const NORMALIZE_QUANTILE: f64 = 0.9999;
pub const NORMALIZE_HEADROOM: f64 = 1.1;
/// Below this quantile the input counts as silent and is returned as is.
const SILENT_QUANTILE: f64 = 1e-8;

/// Linearly interpolated `p`-quantile (the usual `(n - 1) * p` rule).
pub fn quantile(values: &[f32], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v: Vec<f32> = values.to_vec();
    let h = (v.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let frac = h - lo as f64;
    let (_, lo_val, upper) = v.select_nth_unstable_by(lo, f32::total_cmp);
    let lo_val = f64::from(*lo_val);
    if frac == 0.0 || upper.is_empty() {
        return Some(lo_val);
    }
    let hi_val = upper.iter().copied().fold(f32::INFINITY, f32::min);
    Some(lo_val + frac * (f64::from(hi_val) - lo_val))
}

/// Divides by `1.1 * quantile(|x|, 0.9999)` over all channels and clips to
/// `[-1, 1]`, which tames isolated sensor spikes.
pub fn normalize(w: &Waveform) -> Waveform {
    let magnitudes: Vec<f32> = w.channels().iter().flatten().map(|v| v.abs()).collect();
    let q = quantile(&magnitudes, NORMALIZE_QUANTILE).unwrap_or(0.0);
    if q < SILENT_QUANTILE {
        return w.clone();
    }
    let scale = 1.0 / (NORMALIZE_HEADROOM * q);
    w.map_channels(|c| {
        c.iter()
            .map(|&v| ((f64::from(v) * scale) as f32).clamp(-1.0, 1.0))
            .collect()
    })
}
