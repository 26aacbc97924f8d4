use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Dense `(batch, channels, len)` buffer, time-contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    batch: usize,
    channels: usize,
    len: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            batch,
            channels,
            len,
            data: vec![0.0; batch * channels * len],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, len: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != batch * channels * len {
            bail!(
                Shape,
                "buffer of {} values does not fit ({batch}, {channels}, {len})",
                data.len()
            );
        }
        Ok(Self {
            batch,
            channels,
            len,
            data,
        })
    }

    pub fn full(batch: usize, channels: usize, len: usize, value: f32) -> Self {
        Self {
            batch,
            channels,
            len,
            data: vec![value; batch * channels * len],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.batch, self.channels, self.len)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// All channels of one batch item.
    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.channels * self.len;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f32] {
        let n = self.channels * self.len;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn row(&self, b: usize, c: usize) -> &[f32] {
        let start = (b * self.channels + c) * self.len;
        &self.data[start..start + self.len]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f32] {
        let start = (b * self.channels + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "tensor add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn scale(&mut self, factor: f32) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Keeps channels `start..start + count`.
    pub fn select_channels(&self, start: usize, count: usize) -> Tensor {
        assert!(start + count <= self.channels);
        let mut out = Tensor::zeros(self.batch, count, self.len);
        for b in 0..self.batch {
            for c in 0..count {
                out.row_mut(b, c).copy_from_slice(self.row(b, start + c));
            }
        }
        out
    }

    /// Keeps time steps `start..start + len` of every row.
    pub fn narrow(&self, start: usize, len: usize) -> Tensor {
        assert!(start + len <= self.len);
        let mut out = Tensor::zeros(self.batch, self.channels, len);
        for b in 0..self.batch {
            for c in 0..self.channels {
                out.row_mut(b, c).copy_from_slice(&self.row(b, c)[start..start + len]);
            }
        }
        out
    }

    /// Stacks along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            bail!(Shape, "nothing to concatenate");
        };
        let (batch, len) = (first.batch, first.len);
        if parts.iter().any(|t| t.batch != batch || t.len != len) {
            bail!(Shape, "channel concat needs matching batch and length");
        }
        let channels = parts.iter().map(|t| t.channels).sum();
        let mut out = Tensor::zeros(batch, channels, len);
        for b in 0..batch {
            let mut c0 = 0;
            for t in parts {
                for c in 0..t.channels {
                    out.row_mut(b, c0 + c).copy_from_slice(t.row(b, c));
                }
                c0 += t.channels;
            }
        }
        Ok(out)
    }

    /// Stacks single-item tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor> {
        let Some(first) = items.first() else {
            bail!(Shape, "nothing to stack");
        };
        let (channels, len) = (first.channels, first.len);
        let mut data = Vec::with_capacity(items.iter().map(|t| t.numel()).sum());
        let mut batch = 0;
        for t in items {
            if t.channels != channels || t.len != len {
                bail!(
                    Shape,
                    "cannot stack ({}, {}) with ({channels}, {len})",
                    t.channels,
                    t.len
                );
            }
            data.extend_from_slice(&t.data);
            batch += t.batch;
        }
        Tensor::from_vec(batch, channels, len, data)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}
