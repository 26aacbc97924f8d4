use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};
use crate::waveform::Waveform;

/// Filter taps per polyphase branch on each side of the centre.
const HALF_TAPS: usize = 24;
/// Kaiser shape parameter; sidelobes sit near -80 dB.
const KAISER_BETA: f64 = 8.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Rational `up / down` resampler built from a Kaiser-windowed sinc.
///
/// The cutoff is placed so the transition band ends at the lower of the
/// two Nyquist frequencies, keeping stopband leakage at the window's
/// sidelobe level.
#[derive(Clone, Debug)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(up: usize, down: usize) -> Self {
        assert!(up > 0 && down > 0);
        let g = gcd(up as u64, down as u64) as usize;
        let (up, down) = (up / g, down / g);
        let ratio = up.max(down);
        let half = HALF_TAPS * ratio;
        let n = 2 * half + 1;
        // transition width of a Kaiser design, in cycles per (upsampled) sample
        let atten = KAISER_BETA / 0.1102 + 8.7;
        let transition = (atten - 7.95) / (14.36 * (n - 1) as f64);
        let cutoff = (0.5 / ratio as f64 - transition / 2.0).max(0.05 / ratio as f64);
        let denom = bessel_i0(KAISER_BETA);
        let taps = (0..n)
            .map(|i| {
                let m = i as f64 - half as f64;
                let arg = 2.0 * cutoff * m;
                let sinc = if m == 0.0 { 1.0 } else { libm::sin(PI * arg) / (PI * arg) };
                let r = m / half as f64;
                let window = bessel_i0(KAISER_BETA * libm::sqrt((1.0 - r * r).max(0.0))) / denom;
                2.0 * cutoff * sinc * window * up as f64
            })
            .collect();
        Self { up, down, taps }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, len: usize) -> usize {
        (len * self.up).div_ceil(self.down)
    }

    /// Resamples one channel. Edges are extended by odd reflection so that
    /// smooth signals do not see a step at the boundaries.
    pub fn process(&self, x: &[f32]) -> Vec<f32> {
        let len = x.len();
        if len == 0 {
            return Vec::new();
        }
        if self.up == 1 && self.down == 1 {
            return x.to_vec();
        }
        let half = (self.taps.len() - 1) / 2;
        let pad = half / self.up + 2;
        let first = f64::from(x[0]);
        let last = f64::from(x[len - 1]);
        let reflect = |i: isize| -> f64 {
            if i < 0 {
                let j = ((-i) as usize).min(len - 1);
                2.0 * first - f64::from(x[j])
            } else if i as usize >= len {
                let j = (i as usize - (len - 1)).min(len - 1);
                2.0 * last - f64::from(x[len - 1 - j])
            } else {
                f64::from(x[i as usize])
            }
        };
        let ext: Vec<f64> = (-(pad as isize)..(len + pad) as isize).map(reflect).collect();
        let out_len = self.output_len(len);
        let mut y = vec![0.0f32; out_len];
        let n_taps = self.taps.len() as isize;
        let up = self.up as isize;
        for (m, out) in y.iter_mut().enumerate() {
            // position on the upsampled grid, shifted into the padded input
            let n = (m * self.down) as isize + half as isize + pad as isize * up;
            let j_hi = n.div_euclid(up);
            let j_lo = (n - n_taps + 1 + up - 1).div_euclid(up).max(0);
            let mut acc = 0.0;
            let mut j = j_lo;
            while j <= j_hi && (j as usize) < ext.len() {
                acc += ext[j as usize] * self.taps[(n - j * up) as usize];
                j += 1;
            }
            *out = acc as f32;
        }
        y
    }
}

/// Band-limited conversion to `target_rate_hz`; output duration matches the
/// input to within one sample.
pub fn resample(w: &Waveform, target_rate_hz: i64) -> Result<Waveform> {
    if target_rate_hz <= 0 || target_rate_hz > i64::from(u32::MAX) {
        bail!(InvalidArgument, "target sample rate must be positive, got {target_rate_hz}");
    }
    let target = target_rate_hz as u32;
    if target == w.sample_rate() {
        return Ok(w.clone());
    }
    let r = Resampler::new(target as usize, w.sample_rate() as usize);
    Waveform::new(w.channels().iter().map(|c| r.process(c)).collect(), target)
}

/// Simulates a sensor sampled `factor` times slower: anti-alias filter,
/// decimate, interpolate back. Rate and length are unchanged.
pub fn band_limit(w: &Waveform, factor: i64) -> Result<Waveform> {
    if factor < 1 {
        bail!(InvalidArgument, "band-limit factor must be at least 1, got {factor}");
    }
    let factor = factor as usize;
    if (w.sample_rate() as usize) < 2 * factor {
        bail!(
            InvalidArgument,
            "factor {factor} leaves less than 2 Hz of sample rate at {} Hz",
            w.sample_rate()
        );
    }
    if factor == 1 {
        return Ok(w.clone());
    }
    let down = Resampler::new(1, factor);
    let up = Resampler::new(factor, 1);
    let len = w.len();
    let channels = w
        .channels()
        .iter()
        .map(|c| {
            let mut y = up.process(&down.process(c));
            y.resize(len, 0.0);
            y
        })
        .collect();
    Waveform::new(channels, w.sample_rate())
}
