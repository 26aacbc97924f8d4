use alloc::format;
use alloc::vec::Vec;

use super::DiscriminatorSpec;
use crate::error::{bail, Result};
use crate::nn::{
    avg_pool, avg_pool_backward, leaky_relu, leaky_relu_backward, ChannelLayerNorm, Conv1d,
    ConvCache, ConvOptions, LayerNormCache, ParamStore, Tensor,
};
use crate::rng::{self, Rng};

/// Logits and internal activations of one resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleOutput {
    /// `(batch, 1, T_k)`
    pub logits: Tensor,
    /// Post-activation outputs of every layer except the last, in order.
    pub features: Vec<Tensor>,
}

/// Per-scale logits and feature maps. The same type carries gradients
/// with respect to those quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorOutput {
    pub scales: Vec<ScaleOutput>,
}

impl DiscriminatorOutput {
    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            scales: self
                .scales
                .iter()
                .map(|s| ScaleOutput {
                    logits: s.logits.zeros_like(),
                    features: s.features.iter().map(Tensor::zeros_like).collect(),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.scales
            .iter()
            .all(|s| s.logits.is_finite() && s.features.iter().all(Tensor::is_finite))
    }

    pub fn max_abs(&self) -> f32 {
        self.scales
            .iter()
            .flat_map(|s| core::iter::once(&s.logits).chain(&s.features))
            .fold(0.0, |m, t| m.max(t.max_abs()))
    }
}

#[derive(Clone, Debug)]
struct Layer {
    conv: Conv1d,
    norm: Option<ChannelLayerNorm>,
}

#[derive(Clone, Debug)]
struct LayerCache {
    conv: ConvCache,
    norm: Option<LayerNormCache>,
    activation: Tensor,
}

/// Plain conv, grouped strided convs, plain conv, then a conv to logits.
#[derive(Clone, Debug)]
struct ScaleDiscriminator {
    layers: Vec<Layer>,
    logits: Conv1d,
}

#[derive(Clone, Debug)]
struct ScaleCache {
    layers: Vec<LayerCache>,
    logits: ConvCache,
}

impl ScaleDiscriminator {
    fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, spec: &DiscriminatorSpec) -> Self {
        let widths = spec.layer_channels();
        let mut layers = Vec::new();
        // the first layer stays un-normalized so feature maps keep absolute amplitude
        layers.push(Layer {
            conv: Conv1d::new(store, rng, &format!("{name}.0"), 1, widths[0], ConvOptions::new(spec.input_kernel)),
            norm: None,
        });
        for i in 0..spec.stages {
            let idx = i + 1;
            let opts = ConvOptions::new(spec.stage_kernel)
                .stride(spec.stage_stride)
                .groups(spec.groups);
            let conv = Conv1d::new(store, rng, &format!("{name}.{idx}"), widths[i], widths[idx], opts);
            let norm = ChannelLayerNorm::new(store, &format!("{name}.{idx}.norm"), widths[idx]);
            layers.push(Layer { conv, norm: Some(norm) });
        }
        let top = widths[spec.stages];
        let idx = spec.stages + 1;
        layers.push(Layer {
            conv: Conv1d::new(store, rng, &format!("{name}.{idx}"), top, top, ConvOptions::new(spec.penultimate_kernel)),
            norm: Some(ChannelLayerNorm::new(store, &format!("{name}.{idx}.norm"), top)),
        });
        let logits = Conv1d::new(store, rng, &format!("{name}.logits"), top, 1, ConvOptions::new(spec.output_kernel));
        Self { layers, logits }
    }

    fn forward(&self, store: &ParamStore, x: &Tensor, slope: f32, keep: bool) -> Result<(ScaleOutput, Option<ScaleCache>)> {
        let mut features = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (z, conv) = if keep {
                let (z, c) = layer.conv.forward(store, &h)?;
                (z, Some(c))
            } else {
                (layer.conv.apply(store, &h)?, None)
            };
            let (z, norm) = match &layer.norm {
                Some(n) => {
                    let (z, c) = n.forward(store, &z);
                    (z, Some(c))
                }
                None => (z, None),
            };
            let a = leaky_relu(&z, slope);
            if let Some(conv) = conv {
                caches.push(LayerCache {
                    conv,
                    norm,
                    activation: a.clone(),
                });
            }
            features.push(a.clone());
            h = a;
        }
        let (logits, cache) = if keep {
            let (l, c) = self.logits.forward(store, &h)?;
            (
                l,
                Some(ScaleCache {
                    layers: caches,
                    logits: c,
                }),
            )
        } else {
            (self.logits.apply(store, &h)?, None)
        };
        Ok((ScaleOutput { logits, features }, cache))
    }

    fn backward(
        &self,
        store: &mut ParamStore,
        cache: &ScaleCache,
        grad: &ScaleOutput,
        slope: f32,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Tensor> {
        let mut d = self
            .logits
            .backward(store, &cache.logits, &grad.logits, param_grads, true)
            .unwrap();
        for (i, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            d.add_assign(&grad.features[i]);
            let mut dz = leaky_relu_backward(&c.activation, &d, slope);
            if let (Some(norm), Some(nc)) = (&layer.norm, &c.norm) {
                dz = norm.backward(store, nc, &dz, param_grads);
            }
            let need_input = i > 0 || input_grad;
            d = layer.conv.backward(store, &c.conv, &dz, param_grads, need_input)?;
        }
        Some(d)
    }
}

/// Structurally identical discriminators applied to the waveform at
/// successively halved resolutions.
#[derive(Clone, Debug)]
pub struct MultiScaleDiscriminator {
    spec: DiscriminatorSpec,
    params: ParamStore,
    scales: Vec<ScaleDiscriminator>,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorCache {
    input_lens: Vec<usize>,
    scales: Vec<ScaleCache>,
}

impl MultiScaleDiscriminator {
    pub fn new(spec: DiscriminatorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let mut params = ParamStore::new();
        let scales = (0..spec.num_scales)
            .map(|k| ScaleDiscriminator::new(&mut params, &mut rng, &format!("scale.{k}"), &spec))
            .collect();
        Ok(Self { spec, params, scales })
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
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

    fn run(&self, y: &Tensor, keep: bool) -> Result<(DiscriminatorOutput, Option<DiscriminatorCache>)> {
        if y.channels() != 1 {
            bail!(Shape, "discriminator judges single-channel audio, got {} channels", y.channels());
        }
        let min_len = 1usize << (self.spec.num_scales - 1);
        if y.len() < min_len.max(2) {
            bail!(Shape, "input of {} samples is too short for {} scales", y.len(), self.spec.num_scales);
        }
        let mut outputs = Vec::with_capacity(self.scales.len());
        let mut caches = Vec::with_capacity(self.scales.len());
        let mut input_lens = Vec::with_capacity(self.scales.len());
        let mut x = y.clone();
        for (k, scale) in self.scales.iter().enumerate() {
            if k > 0 {
                x = avg_pool(&x);
            }
            input_lens.push(x.len());
            let (out, cache) = scale.forward(&self.params, &x, self.spec.leaky_slope, keep)?;
            outputs.push(out);
            caches.extend(cache);
        }
        let out = DiscriminatorOutput { scales: outputs };
        Ok((out, keep.then_some(DiscriminatorCache { input_lens, scales: caches })))
    }

    pub fn forward(&self, y: &Tensor) -> Result<(DiscriminatorOutput, DiscriminatorCache)> {
        let (out, cache) = self.run(y, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    /// Forward pass without caches, for targets that need no gradient.
    pub fn apply(&self, y: &Tensor) -> Result<DiscriminatorOutput> {
        Ok(self.run(y, false)?.0)
    }

    /// Backpropagates `grad` (gradients w.r.t. logits and feature maps).
    pub fn backward(
        &mut self,
        cache: &DiscriminatorCache,
        grad: &DiscriminatorOutput,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Tensor> {
        assert_eq!(grad.num_scales(), self.scales.len());
        let slope = self.spec.leaky_slope;
        let mut scale_grads = Vec::with_capacity(self.scales.len());
        for ((scale, c), g) in self.scales.iter().zip(&cache.scales).zip(&grad.scales) {
            scale_grads.push(scale.backward(&mut self.params, c, g, slope, param_grads, input_grad));
        }
        if !input_grad {
            return None;
        }
        let mut acc: Option<Tensor> = None;
        for k in (0..self.scales.len()).rev() {
            let mut g = scale_grads[k].take().expect("input gradient requested");
            if let Some(deeper) = acc.take() {
                g.add_assign(&avg_pool_backward(&deeper, cache.input_lens[k]));
            }
            acc = Some(g);
        }
        acc
    }
}
