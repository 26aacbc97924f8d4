use alloc::format;
use alloc::vec::Vec;

use super::GeneratorSpec;
use crate::error::{bail, Result};
use crate::nn::{
    elu, elu_backward, tanh, tanh_backward, Conv1d, ConvCache, ConvOptions, ConvTranspose1d,
    ConvTransposeCache, ParamStore, Tensor,
};
use crate::rng::{self, Rng};

/// `x + conv1x1(elu(conv_dilated(elu(x))))`
#[derive(Clone, Debug)]
struct ResidualUnit {
    dilated: Conv1d,
    pointwise: Conv1d,
}

#[derive(Clone, Debug)]
struct ResidualCache {
    dilated: ConvCache,
    pointwise: ConvCache,
}

impl ResidualUnit {
    fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, c: usize, spec: &GeneratorSpec, dilation: usize) -> Self {
        let wn = spec.weight_norm;
        Self {
            dilated: Conv1d::new(
                store,
                rng,
                &format!("{name}.dilated"),
                c,
                c,
                ConvOptions::new(spec.residual_kernel).dilation(dilation).weight_norm(wn),
            ),
            pointwise: Conv1d::new(store, rng, &format!("{name}.pointwise"), c, c, ConvOptions::new(1).weight_norm(wn)),
        }
    }

    fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, ResidualCache)> {
        let (h, dilated) = self.dilated.forward(store, &elu(x))?;
        let (o, pointwise) = self.pointwise.forward(store, &elu(&h))?;
        Ok((x.add(&o), ResidualCache { dilated, pointwise }))
    }

    fn backward(&self, store: &mut ParamStore, cache: &ResidualCache, dy: &Tensor) -> Tensor {
        let d = self.pointwise.backward(store, &cache.pointwise, dy, true, true).unwrap();
        let d = elu_backward(cache.pointwise.input(), &d);
        let d = self.dilated.backward(store, &cache.dilated, &d, true, true).unwrap();
        let mut dx = elu_backward(cache.dilated.input(), &d);
        dx.add_assign(dy);
        dx
    }
}

#[derive(Clone, Debug)]
struct EncoderBlock {
    units: Vec<ResidualUnit>,
    down: Conv1d,
}

#[derive(Clone, Debug)]
struct EncoderCache {
    units: Vec<ResidualCache>,
    down: ConvCache,
}

impl EncoderBlock {
    fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, EncoderCache)> {
        let mut h = x.clone();
        let mut units = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let (next, c) = u.forward(store, &h)?;
            units.push(c);
            h = next;
        }
        let (y, down) = self.down.forward(store, &elu(&h))?;
        Ok((y, EncoderCache { units, down }))
    }

    fn backward(&self, store: &mut ParamStore, cache: &EncoderCache, dy: &Tensor) -> Tensor {
        let d = self.down.backward(store, &cache.down, dy, true, true).unwrap();
        let mut d = elu_backward(cache.down.input(), &d);
        for (u, c) in self.units.iter().zip(&cache.units).rev() {
            d = u.backward(store, c, &d);
        }
        d
    }
}

#[derive(Clone, Debug)]
struct DecoderBlock {
    up: ConvTranspose1d,
    units: Vec<ResidualUnit>,
}

#[derive(Clone, Debug)]
struct DecoderCache {
    up_input: Tensor,
    up: ConvTransposeCache,
    units: Vec<ResidualCache>,
}

impl DecoderBlock {
    fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, DecoderCache)> {
        let a = elu(x);
        let (mut h, up) = self.up.forward(store, &a)?;
        let mut units = Vec::with_capacity(self.units.len());
        for u in &self.units {
            let (next, c) = u.forward(store, &h)?;
            units.push(c);
            h = next;
        }
        Ok((h, DecoderCache { up_input: a, up, units }))
    }

    fn backward(&self, store: &mut ParamStore, cache: &DecoderCache, dy: &Tensor) -> Tensor {
        let mut d = dy.clone();
        for (u, c) in self.units.iter().zip(&cache.units).rev() {
            d = u.backward(store, c, &d);
        }
        let d = self.up.backward(store, &cache.up, &d, true, true).unwrap();
        elu_backward(&cache.up_input, &d)
    }
}

/// Symmetric encoder-decoder over waveforms with additive skips between
/// mirrored blocks and an outermost skip carrying only the speech channel
/// (input channel 0) to the output head.
#[derive(Clone, Debug)]
pub struct Generator {
    spec: GeneratorSpec,
    params: ParamStore,
    input: Conv1d,
    encoder: Vec<EncoderBlock>,
    encoder_out: Conv1d,
    decoder_in: Conv1d,
    decoder: Vec<DecoderBlock>,
    speech_skip: Conv1d,
    output: Conv1d,
}

/// Activations kept by [`Generator::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct GeneratorCache {
    input: ConvCache,
    encoder: Vec<EncoderCache>,
    encoder_out: ConvCache,
    decoder_in: ConvCache,
    decoder: Vec<DecoderCache>,
    speech_skip: ConvCache,
    output: ConvCache,
    bottleneck: (usize, usize, usize),
    out: Tensor,
}

impl GeneratorCache {
    /// Shape `(batch, channels, len)` of the innermost representation.
    pub fn bottleneck_shape(&self) -> (usize, usize, usize) {
        self.bottleneck
    }
}

impl Generator {
    pub fn new(spec: GeneratorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let mut store = ParamStore::new();
        let wn = spec.weight_norm;
        let conv = |k: usize| ConvOptions::new(k).weight_norm(wn);
        let rng = &mut rng;
        let input = Conv1d::new(&mut store, rng, "input", spec.in_channels, spec.base_channels, conv(spec.kernel));
        let mut encoder = Vec::new();
        for (i, &s) in spec.strides.iter().enumerate() {
            let c = spec.channels_at(i);
            let units = spec
                .dilations
                .iter()
                .enumerate()
                .map(|(j, &d)| ResidualUnit::new(&mut store, rng, &format!("encoder.{i}.unit.{j}"), c, &spec, d))
                .collect();
            let down = Conv1d::new(&mut store, rng, &format!("encoder.{i}.down"), c, 2 * c, conv(2 * s).stride(s));
            encoder.push(EncoderBlock { units, down });
        }
        let top = spec.bottleneck_channels();
        let encoder_out = Conv1d::new(&mut store, rng, "encoder.out", top, top, conv(spec.kernel));
        let decoder_in = Conv1d::new(&mut store, rng, "decoder.in", top, top, conv(spec.kernel));
        let mut decoder = Vec::new();
        for (j, &s) in spec.strides.iter().enumerate().rev() {
            let c = spec.channels_at(j);
            let block = decoder.len();
            let up = ConvTranspose1d::new(&mut store, rng, &format!("decoder.{block}.up"), 2 * c, c, 2 * s, s, wn);
            let units = spec
                .dilations
                .iter()
                .enumerate()
                .map(|(u, &d)| ResidualUnit::new(&mut store, rng, &format!("decoder.{block}.unit.{u}"), c, &spec, d))
                .collect();
            decoder.push(DecoderBlock { up, units });
        }
        let speech_skip = Conv1d::new(&mut store, rng, "speech_skip", 1, spec.base_channels, conv(1));
        let output = Conv1d::new(&mut store, rng, "output", spec.base_channels, spec.out_channels, conv(spec.kernel));
        Ok(Self {
            spec,
            params: store,
            input,
            encoder,
            encoder_out,
            decoder_in,
            decoder,
            speech_skip,
            output,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn count_parameters(&self) -> usize {
        self.params.num_values()
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != self.spec.in_channels {
            bail!(
                Shape,
                "generator expects {} input channels, got {}",
                self.spec.in_channels,
                x.channels()
            );
        }
        let stride = self.spec.total_stride();
        if x.is_empty() || x.len() % stride != 0 {
            bail!(Shape, "input length {} is not a positive multiple of {stride}", x.len());
        }
        Ok(())
    }

    /// Runs the generator on `(batch, in_channels, len)` input.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, GeneratorCache)> {
        self.check_input(x)?;
        let p = &self.params;
        let (mut h, input) = self.input.forward(p, x)?;
        let mut encoder = Vec::with_capacity(self.encoder.len());
        let mut skips = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            let (next, c) = block.forward(p, &h)?;
            encoder.push(c);
            skips.push(next.clone());
            h = next;
        }
        let (bottleneck, encoder_out) = self.encoder_out.forward(p, &elu(&h))?;
        let (mut h, decoder_in) = self.decoder_in.forward(p, &elu(&bottleneck))?;
        let mut decoder = Vec::with_capacity(self.decoder.len());
        for (block, skip) in self.decoder.iter().zip(skips.iter().rev()) {
            h.add_assign(skip);
            let (next, c) = block.forward(p, &h)?;
            decoder.push(c);
            h = next;
        }
        let (projected, speech_skip) = self.speech_skip.forward(p, &x.select_channels(0, 1))?;
        h.add_assign(&projected);
        let (o, output) = self.output.forward(p, &elu(&h))?;
        let out = tanh(&o);
        let cache = GeneratorCache {
            input,
            encoder,
            encoder_out,
            decoder_in,
            decoder,
            speech_skip,
            output,
            bottleneck: bottleneck.shape(),
            out: out.clone(),
        };
        Ok((out, cache))
    }

    /// Inference-only forward pass.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Accumulates parameter gradients for `dy = dL/d(output)` and returns
    /// `dL/d(input)` when `input_grad` is set.
    pub fn backward(&mut self, cache: &GeneratorCache, dy: &Tensor, input_grad: bool) -> Option<Tensor> {
        let p = &mut self.params;
        let d = tanh_backward(&cache.out, dy);
        let d = self.output.backward(p, &cache.output, &d, true, true).unwrap();
        let mut d = elu_backward(cache.output.input(), &d);
        let speech_grad = self.speech_skip.backward(p, &cache.speech_skip, &d, true, input_grad);
        let mut skip_grads = Vec::with_capacity(self.decoder.len());
        for (block, c) in self.decoder.iter().zip(&cache.decoder).rev() {
            d = block.backward(p, c, &d);
            skip_grads.push(d.clone());
        }
        let d = self.decoder_in.backward(p, &cache.decoder_in, &d, true, true).unwrap();
        let d = elu_backward(cache.decoder_in.input(), &d);
        let d = self.encoder_out.backward(p, &cache.encoder_out, &d, true, true).unwrap();
        let mut d = elu_backward(cache.encoder_out.input(), &d);
        // skip_grads[i] belongs to the output of encoder block i
        for (i, (block, c)) in self.encoder.iter().zip(&cache.encoder).enumerate().rev() {
            d.add_assign(&skip_grads[i]);
            d = block.backward(p, c, &d);
        }
        let mut dx = self.input.backward(p, &cache.input, &d, true, input_grad)?;
        let speech_grad = speech_grad?;
        for b in 0..dx.batch() {
            for (a, g) in dx.row_mut(b, 0).iter_mut().zip(speech_grad.row(b, 0)) {
                *a += g;
            }
        }
        Some(dx)
    }
}
