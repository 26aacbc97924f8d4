use crate::error::{bail, Result};
use crate::nn::Tensor;
use crate::waveform::Waveform;

/// Tolerance of the `noisy = clean + gain * interferer` identity.
pub const MIXTURE_TOLERANCE: f32 = 1e-6;

/// Aligned microphone mixture, accelerometer conditioning and clean target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    noisy: Waveform,
    accel: Waveform,
    clean: Waveform,
    interferer: Waveform,
    gain: f32,
}

impl TrainingExample {
    /// Validates shapes and the mixture identity. `granularity` is the length
    /// multiple the model requires (its total stride).
    pub fn new(
        noisy: Waveform,
        accel: Waveform,
        clean: Waveform,
        interferer: Waveform,
        gain: f32,
        granularity: usize,
    ) -> Result<Self> {
        if noisy.num_channels() != 1 || clean.num_channels() != 1 || interferer.num_channels() != 1 {
            bail!(Shape, "noisy, clean and interferer must be single-channel");
        }
        let rate = clean.sample_rate();
        let len = clean.len();
        for (name, w) in [("noisy", &noisy), ("accel", &accel), ("interferer", &interferer)] {
            if w.sample_rate() != rate {
                bail!(Shape, "{name} is at {} Hz, clean at {rate} Hz", w.sample_rate());
            }
            if w.len() != len {
                bail!(Shape, "{name} has {} samples, clean {len}", w.len());
            }
        }
        if len == 0 || granularity == 0 || len % granularity != 0 {
            bail!(Shape, "example length {len} is not a positive multiple of {granularity}");
        }
        let worst = noisy
            .channel(0)
            .iter()
            .zip(clean.channel(0))
            .zip(interferer.channel(0))
            .map(|((x, y), n)| (x - (y + gain * n)).abs())
            .fold(0.0f32, f32::max);
        if worst > MIXTURE_TOLERANCE {
            bail!(InvalidArgument, "noisy differs from clean + gain * interferer by {worst}");
        }
        Ok(Self {
            noisy,
            accel,
            clean,
            interferer,
            gain,
        })
    }

    pub fn noisy(&self) -> &Waveform {
        &self.noisy
    }

    pub fn accel(&self) -> &Waveform {
        &self.accel
    }

    pub fn clean(&self) -> &Waveform {
        &self.clean
    }

    pub fn interferer(&self) -> &Waveform {
        &self.interferer
    }

    pub fn gain(&self) -> f32 {
        self.gain
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.clean.sample_rate()
    }

    /// Generator input `(1, 1 + accel channels, len)`: speech first.
    pub fn model_input(&self) -> Tensor {
        waveforms_to_tensor(&[&self.noisy, &self.accel])
    }

    /// Generator input without the conditioning channels.
    pub fn audio_only_input(&self) -> Tensor {
        waveforms_to_tensor(&[&self.noisy])
    }

    pub fn target(&self) -> Tensor {
        waveforms_to_tensor(&[&self.clean])
    }
}

/// Concatenates the channels of equally long waveforms into `(1, C, len)`.
pub fn waveforms_to_tensor(parts: &[&Waveform]) -> Tensor {
    let len = parts[0].len();
    let channels: usize = parts.iter().map(|w| w.num_channels()).sum();
    let mut t = Tensor::zeros(1, channels, len);
    let mut c = 0;
    for w in parts {
        assert_eq!(w.len(), len, "waveforms must be equally long");
        for ch in w.channels() {
            t.row_mut(0, c).copy_from_slice(ch);
            c += 1;
        }
    }
    t
}
