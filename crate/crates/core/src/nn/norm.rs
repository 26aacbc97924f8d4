use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{ParamId, ParamStore, Tensor};

const EPS: f32 = 1e-5;

/// Layer normalization across channels, independently at every time step,
/// followed by a per-channel affine map.
#[derive(Clone, Debug)]
pub struct ChannelLayerNorm {
    pub channels: usize,
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Clone, Debug)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f32>,
}

impl ChannelLayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        let gamma = store.add_constant(format!("{name}.gamma"), vec![channels], 1.0);
        let beta = store.add_constant(format!("{name}.beta"), vec![channels], 0.0);
        Self {
            channels,
            gamma,
            beta,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> (Tensor, LayerNormCache) {
        assert_eq!(x.channels(), self.channels);
        let (batch, c, len) = x.shape();
        let gamma = store.value(self.gamma);
        let beta = store.value(self.beta);
        let mut normalized = x.clone();
        let mut inv_std = vec![0.0; batch * len];
        let mut mean = vec![0.0f32; len];
        let mut var = vec![0.0f32; len];
        for b in 0..batch {
            mean.fill(0.0);
            var.fill(0.0);
            let item = normalized.item_mut(b);
            for row in item.chunks(len) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= c as f32);
            for row in item.chunks(len) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            let inv = &mut inv_std[b * len..(b + 1) * len];
            for (i, s) in inv.iter_mut().zip(&var) {
                *i = 1.0 / libm::sqrtf(s / c as f32 + EPS);
            }
            for row in item.chunks_mut(len) {
                for ((v, m), i) in row.iter_mut().zip(&mean).zip(inv.iter()) {
                    *v = (*v - m) * i;
                }
            }
        }
        let mut y = normalized.clone();
        for b in 0..batch {
            for ch in 0..c {
                let (g, be) = (gamma[ch], beta[ch]);
                y.row_mut(b, ch).iter_mut().for_each(|v| *v = *v * g + be);
            }
        }
        (
            y,
            LayerNormCache {
                normalized,
                inv_std,
            },
        )
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &LayerNormCache,
        dy: &Tensor,
        param_grads: bool,
    ) -> Tensor {
        let xhat = &cache.normalized;
        assert_eq!(xhat.shape(), dy.shape());
        let (batch, c, len) = dy.shape();
        let gamma = store.value(self.gamma).to_vec();
        if param_grads {
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for b in 0..batch {
                for ch in 0..c {
                    let (d, h) = (dy.row(b, ch), xhat.row(b, ch));
                    dgamma[ch] += d.iter().zip(h).map(|(a, b)| a * b).sum::<f32>();
                    dbeta[ch] += d.iter().sum::<f32>();
                }
            }
            for (g, d) in store.grad_mut(self.gamma).iter_mut().zip(&dgamma) {
                *g += d;
            }
            for (g, d) in store.grad_mut(self.beta).iter_mut().zip(&dbeta) {
                *g += d;
            }
        }
        let mut dx = dy.zeros_like();
        let mut sum_d = vec![0.0f32; len];
        let mut sum_dh = vec![0.0f32; len];
        for b in 0..batch {
            sum_d.fill(0.0);
            sum_dh.fill(0.0);
            for ch in 0..c {
                let (d, h) = (dy.row(b, ch), xhat.row(b, ch));
                for t in 0..len {
                    let dh = d[t] * gamma[ch];
                    sum_d[t] += dh;
                    sum_dh[t] += dh * h[t];
                }
            }
            let inv = &cache.inv_std[b * len..(b + 1) * len];
            let n = c as f32;
            for ch in 0..c {
                let (d, h) = (dy.row(b, ch), xhat.row(b, ch));
                let g = gamma[ch];
                let out = dx.row_mut(b, ch);
                for t in 0..len {
                    out[t] = inv[t] / n * (n * d[t] * g - sum_d[t] - h[t] * sum_dh[t]);
                }
            }
        }
        dx
    }

    pub fn num_params(&self) -> usize {
        2 * self.channels
    }
}
