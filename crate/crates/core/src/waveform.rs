use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Sampled signal with one or more equally long channels, stored
/// channel-major. Samples are dimensionless amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    sample_rate: u32,
    channels: Vec<Vec<f32>>,
}

impl Waveform {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            bail!(InvalidArgument, "sample rate must be positive");
        }
        let Some(first) = channels.first() else {
            bail!(InvalidArgument, "a waveform needs at least one channel");
        };
        let len = first.len();
        if channels.iter().any(|c| c.len() != len) {
            bail!(InvalidArgument, "channels have different lengths");
        }
        Ok(Self {
            sample_rate,
            channels,
        })
    }

    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        Self::new(alloc::vec![samples], sample_rate)
    }

    /// Splits an interleaved frame buffer.
    pub fn from_interleaved(samples: &[f32], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 || samples.len() % channels != 0 {
            bail!(InvalidArgument, "{} samples do not split into {channels} channels", samples.len());
        }
        let frames = samples.len() / channels;
        let mut out = alloc::vec![Vec::with_capacity(frames); channels];
        for frame in samples.chunks(channels) {
            for (c, v) in out.iter_mut().zip(frame) {
                c.push(*v);
            }
        }
        Self::new(out, sample_rate)
    }

    pub fn to_interleaved(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.len() * self.num_channels());
        for i in 0..self.len() {
            out.extend(self.channels.iter().map(|c| c[i]));
        }
        out
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f32>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f32>> {
        self.channels
    }

    /// Keeps a single channel.
    pub fn select_channel(&self, i: usize) -> Result<Waveform> {
        match self.channels.get(i) {
            Some(c) => Waveform::mono(c.clone(), self.sample_rate),
            None => bail!(InvalidArgument, "channel {i} out of range ({} channels)", self.num_channels()),
        }
    }

    /// Samples `start..start + len` of every channel; zero-pads past the end.
    pub fn window(&self, start: usize, len: usize) -> Waveform {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                let mut w: Vec<f32> = c.iter().skip(start).take(len).copied().collect();
                w.resize(len, 0.0);
                w
            })
            .collect();
        Waveform {
            sample_rate: self.sample_rate,
            channels,
        }
    }

    /// Pads with zeros (or truncates) to `len` samples.
    pub fn with_len(&self, len: usize) -> Waveform {
        self.window(0, len)
    }

    pub fn map_channels(&self, mut f: impl FnMut(&[f32]) -> Vec<f32>) -> Waveform {
        Waveform {
            sample_rate: self.sample_rate,
            channels: self.channels.iter().map(|c| f(c)).collect(),
        }
    }

    pub fn max_abs(&self) -> f32 {
        self.channels
            .iter()
            .flatten()
            .fold(0.0f32, |m, v| m.max(v.abs()))
    }
}
