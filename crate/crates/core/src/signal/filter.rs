use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{bail, Result};
use crate::waveform::Waveform;

/// Second-order section in transposed direct form II.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator without the leading 1.
    pub a: [f64; 2],
}

impl Biquad {
    /// Bilinear-transform Butterworth high-pass.
    pub fn butterworth_high_pass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let k = libm::tan(PI * cutoff_hz / sample_rate_hz);
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        }
    }

    /// State that makes a constant input of 1 produce its steady-state output.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * dc;
        [b1 - a1 * dc + z2, z2]
    }

    fn run(&self, x: &mut [f64], init: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = init;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Zero-phase forward-backward filtering with odd edge extension and
    /// steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f32]) -> Vec<f32> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = 9.min(n - 1);
        let first = f64::from(x[0]);
        let last = f64::from(x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - f64::from(x[i])));
        ext.extend(x.iter().map(|&v| f64::from(v)));
        ext.extend((1..=pad).map(|i| 2.0 * last - f64::from(x[n - 1 - i])));
        let zi = self.steady_state();
        let x0 = ext[0];
        self.run(&mut ext, [zi[0] * x0, zi[1] * x0]);
        ext.reverse();
        let x0 = ext[0];
        self.run(&mut ext, [zi[0] * x0, zi[1] * x0]);
        ext.reverse();
        ext[pad..pad + n].iter().map(|&v| v as f32).collect()
    }
}

/// Zero-phase second-order Butterworth high-pass applied to every channel.
pub fn high_pass(w: &Waveform, cutoff_hz: f64) -> Result<Waveform> {
    let nyquist = f64::from(w.sample_rate()) / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        bail!(
            InvalidArgument,
            "high-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        );
    }
    let section = Biquad::butterworth_high_pass(cutoff_hz, f64::from(w.sample_rate()));
    Ok(w.map_channels(|c| section.filtfilt(c)))
}
