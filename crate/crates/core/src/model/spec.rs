use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Hyperparameters of the wave-to-wave UNet generator.
///
/// Encoder: plain conv, one block per stride (three dilated residual units
/// then a strided conv that doubles the width), plain conv. The decoder
/// mirrors it with transposed convs that halve the width. Every conv is
/// weight-normalized and preceded by an ELU, except the first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Speech channel first, then accelerometer channels.
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_channels: usize,
    pub strides: Vec<usize>,
    pub dilations: Vec<usize>,
    /// Kernel of the plain convolutions framing encoder and decoder.
    pub kernel: usize,
    pub residual_kernel: usize,
    pub weight_norm: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            in_channels: 2,
            out_channels: 1,
            base_channels: 32,
            strides: vec![2, 2, 8, 8],
            dilations: vec![1, 3, 9],
            kernel: 7,
            residual_kernel: 3,
            weight_norm: true,
        }
    }
}

impl GeneratorSpec {
    /// Audio plus `accel_channels` conditioning channels.
    pub fn conditional(accel_channels: usize) -> Self {
        Self {
            in_channels: 1 + accel_channels,
            ..Self::default()
        }
    }

    /// One input channel, for the audio-only ablation and the
    /// audio-to-accelerometer mapping.
    pub fn single_input() -> Self {
        Self {
            in_channels: 1,
            ..Self::default()
        }
    }

    pub fn with_base_channels(mut self, base: usize) -> Self {
        self.base_channels = base;
        self
    }

    pub fn total_stride(&self) -> usize {
        self.strides.iter().product()
    }

    /// Width at encoder depth `i` (0 = after the input conv).
    pub fn channels_at(&self, depth: usize) -> usize {
        self.base_channels << depth
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.channels_at(self.strides.len())
    }

    pub fn bottleneck_len(&self, len: usize) -> usize {
        len / self.total_stride()
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.base_channels == 0 {
            bail!(Config, "generator channel counts must be positive");
        }
        if self.strides.is_empty() || self.strides.contains(&0) {
            bail!(Config, "generator strides must be non-empty and positive");
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            bail!(Config, "dilations must be non-empty and positive");
        }
        if self.kernel == 0 || self.residual_kernel == 0 {
            bail!(Config, "kernel sizes must be positive");
        }
        Ok(())
    }

    /// Number of scalar parameters, computed from the spec alone.
    pub fn count_parameters(&self) -> usize {
        let wn = usize::from(self.weight_norm);
        let conv = |cin: usize, cout: usize, k: usize| cout * cin * k + cout + wn * cout;
        let conv_t = |cin: usize, cout: usize, k: usize| cin * cout * k + cout + wn * cin;
        let res = |c: usize| {
            self.dilations.len() * (conv(c, c, self.residual_kernel) + conv(c, c, 1))
        };
        let mut n = conv(self.in_channels, self.base_channels, self.kernel);
        for (i, &s) in self.strides.iter().enumerate() {
            let c = self.channels_at(i);
            n += res(c) + conv(c, 2 * c, 2 * s);
            n += conv_t(2 * c, c, 2 * s) + res(c);
        }
        let top = self.bottleneck_channels();
        n += 2 * conv(top, top, self.kernel);
        n += conv(1, self.base_channels, 1);
        n += conv(self.base_channels, self.out_channels, self.kernel);
        n
    }
}

/// Hyperparameters shared by each of the structurally identical
/// per-resolution discriminators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub num_scales: usize,
    /// Width of the initial plain convolution.
    pub base_channels: usize,
    pub max_channels: usize,
    pub groups: usize,
    pub stages: usize,
    pub stage_stride: usize,
    pub channel_multiplier: usize,
    pub input_kernel: usize,
    pub stage_kernel: usize,
    pub penultimate_kernel: usize,
    pub output_kernel: usize,
    pub leaky_slope: f32,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self {
            num_scales: 3,
            base_channels: 16,
            max_channels: 1024,
            groups: 4,
            stages: 4,
            stage_stride: 4,
            channel_multiplier: 4,
            input_kernel: 15,
            stage_kernel: 41,
            penultimate_kernel: 5,
            output_kernel: 3,
            leaky_slope: 0.3,
        }
    }
}

impl DiscriminatorSpec {
    /// A narrow variant for CPU-scale experiments; only widths change.
    pub fn small(base_channels: usize, max_channels: usize) -> Self {
        Self {
            base_channels,
            max_channels,
            ..Self::default()
        }
    }

    /// Resolution divisor of each scale: 1, 2, 4, ...
    pub fn scale_factors(&self) -> Vec<usize> {
        (0..self.num_scales).map(|k| 1 << k).collect()
    }

    /// Output width of every convolution, in order (the last one is 1).
    pub fn layer_channels(&self) -> Vec<usize> {
        let mut out = vec![self.base_channels];
        let mut c = self.base_channels;
        for _ in 0..self.stages {
            c = (c * self.channel_multiplier).min(self.max_channels);
            out.push(c);
        }
        out.push(c);
        out.push(1);
        out
    }

    /// Internal (feature) layers per scale.
    pub fn num_feature_layers(&self) -> usize {
        self.stages + 2
    }

    /// Logit count at scale 0 for an input of `len` samples.
    pub fn logits_len(&self, len: usize) -> usize {
        (0..self.stages).fold(len, |l, _| l.div_ceil(self.stage_stride))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_scales == 0 || self.base_channels == 0 || self.groups == 0 {
            bail!(Config, "discriminator sizes must be positive");
        }
        if self.stage_stride == 0 || self.channel_multiplier == 0 {
            bail!(Config, "stage stride and multiplier must be positive");
        }
        let widths = self.layer_channels();
        for pair in widths[..=self.stages].windows(2) {
            if pair[0] % self.groups != 0 || pair[1] % self.groups != 0 {
                bail!(
                    Config,
                    "grouped conv {} -> {} is not divisible into {} groups",
                    pair[0],
                    pair[1],
                    self.groups
                );
            }
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope <= 1.0) {
            bail!(Config, "leaky slope must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn count_parameters(&self) -> usize {
        let w = self.layer_channels();
        let mut per_scale = w[0] * self.input_kernel + w[0];
        for i in 0..self.stages {
            per_scale += w[i + 1] * (w[i] / self.groups) * self.stage_kernel + w[i + 1];
        }
        let top = w[self.stages];
        per_scale += top * top * self.penultimate_kernel + top;
        per_scale += top * self.output_kernel + 1;
        // layer norm gain and shift on every internal layer but the first
        per_scale += 2 * w[1..=self.stages + 1].iter().sum::<usize>();
        per_scale * self.num_scales
    }
}
