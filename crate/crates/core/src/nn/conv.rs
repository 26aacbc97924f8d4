use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{gemm, MatMut, MatRef};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{bail, Result};
use crate::rng::Rng;

/// Range of output positions `t` with `0 <= t * stride + offset < long`,
/// clamped to `0..short`.
fn valid_range(offset: isize, stride: usize, long: usize, short: usize) -> (usize, usize) {
    let lo = if offset >= 0 {
        0
    } else {
        ((-offset) as usize).div_ceil(stride)
    };
    let room = long as isize - offset;
    let hi = if room <= 0 {
        0
    } else {
        (room as usize).div_ceil(stride)
    };
    let lo = lo.min(short);
    (lo, hi.min(short).max(lo))
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    channels: usize,
    long: usize,
    short: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    pad_left: usize,
}

/// Gathers `col[(c, k), t] = x[c, t * stride + k * dilation - pad_left]`.
fn im2col(x: &[f32], g: Geometry, col: &mut [f32]) {
    for c in 0..g.channels {
        let src = &x[c * g.long..(c + 1) * g.long];
        for k in 0..g.kernel {
            let row = &mut col[(c * g.kernel + k) * g.short..][..g.short];
            let off = (k * g.dilation) as isize - g.pad_left as isize;
            let (lo, hi) = valid_range(off, g.stride, g.long, g.short);
            row[..lo].fill(0.0);
            row[hi..].fill(0.0);
            if lo == hi {
                continue;
            }
            if g.stride == 1 {
                let s0 = (lo as isize + off) as usize;
                row[lo..hi].copy_from_slice(&src[s0..s0 + hi - lo]);
            } else {
                for (t, r) in row.iter_mut().enumerate().take(hi).skip(lo) {
                    *r = src[(t as isize * g.stride as isize + off) as usize];
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back into `x`.
fn col2im(col: &[f32], g: Geometry, x: &mut [f32]) {
    for c in 0..g.channels {
        let dst = &mut x[c * g.long..(c + 1) * g.long];
        for k in 0..g.kernel {
            let row = &col[(c * g.kernel + k) * g.short..][..g.short];
            let off = (k * g.dilation) as isize - g.pad_left as isize;
            let (lo, hi) = valid_range(off, g.stride, g.long, g.short);
            if lo == hi {
                continue;
            }
            if g.stride == 1 {
                let s0 = (lo as isize + off) as usize;
                for (d, r) in dst[s0..s0 + hi - lo].iter_mut().zip(&row[lo..hi]) {
                    *d += *r;
                }
            } else {
                for (t, r) in row.iter().enumerate().take(hi).skip(lo) {
                    dst[(t as isize * g.stride as isize + off) as usize] += *r;
                }
            }
        }
    }
}

fn weight_norm(v: &[f32], gain: &[f32], chunk: usize) -> (Vec<f32>, Vec<f32>) {
    let mut w = vec![0.0; v.len()];
    let mut norms = Vec::with_capacity(gain.len());
    for ((vr, wr), g) in v.chunks(chunk).zip(w.chunks_mut(chunk)).zip(gain) {
        let n = libm::sqrtf(vr.iter().map(|a| a * a).sum::<f32>()).max(1e-12);
        for (a, b) in wr.iter_mut().zip(vr) {
            *a = g * b / n;
        }
        norms.push(n);
    }
    (w, norms)
}

/// Chains `dw` through `w = g * v / |v|` into the direction and gain grads.
fn weight_norm_backward(store: &mut ParamStore, v: ParamId, gain: ParamId, dw: &[f32], chunk: usize) {
    let vv = store.value(v).to_vec();
    let gg = store.value(gain).to_vec();
    let mut dgain = vec![0.0; gg.len()];
    let mut dv = vec![0.0; vv.len()];
    for (i, ((vr, dwr), dvr)) in vv
        .chunks(chunk)
        .zip(dw.chunks(chunk))
        .zip(dv.chunks_mut(chunk))
        .enumerate()
    {
        let n = libm::sqrtf(vr.iter().map(|a| a * a).sum::<f32>()).max(1e-12);
        let dg: f32 = dwr.iter().zip(vr).map(|(a, b)| a * b).sum::<f32>() / n;
        dgain[i] = dg;
        let a = gg[i] / n;
        let b = gg[i] * dg / (n * n);
        for ((d, w), x) in dvr.iter_mut().zip(dwr).zip(vr) {
            *d = a * w - b * x;
        }
    }
    for (g, d) in store.grad_mut(gain).iter_mut().zip(&dgain) {
        *g += d;
    }
    for (g, d) in store.grad_mut(v).iter_mut().zip(&dv) {
        *g += d;
    }
}

fn add_into(store: &mut ParamStore, id: ParamId, delta: &[f32]) {
    for (g, d) in store.grad_mut(id).iter_mut().zip(delta) {
        *g += d;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output length `ceil(len / stride)`, padding split evenly (extra on the right).
    Same,
    Explicit(usize, usize),
}

/// 1-D convolution with optional groups and weight normalization.
///
/// Weight layout is `(out, in / groups, kernel)`.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub padding: Padding,
    weight: ParamId,
    gain: Option<ParamId>,
    bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    input: Tensor,
    pad_left: usize,
    out_len: usize,
}

impl ConvCache {
    pub fn input(&self) -> &Tensor {
        &self.input
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConvOptions {
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub groups: usize,
    pub padding: Padding,
    pub weight_norm: bool,
}

impl ConvOptions {
    pub fn new(kernel: usize) -> Self {
        Self {
            kernel,
            stride: 1,
            dilation: 1,
            groups: 1,
            padding: Padding::Same,
            weight_norm: false,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn dilation(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn weight_norm(mut self, on: bool) -> Self {
        self.weight_norm = on;
        self
    }
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        opts: ConvOptions,
    ) -> Self {
        assert!(opts.groups > 0 && in_channels % opts.groups == 0 && out_channels % opts.groups == 0);
        let cin_g = in_channels / opts.groups;
        let bound = 1.0 / libm::sqrtf((cin_g * opts.kernel) as f32);
        let shape = vec![out_channels, cin_g, opts.kernel];
        let (weight, gain) = if opts.weight_norm {
            let v = store.add_uniform(format!("{name}.weight_v"), shape, bound, rng);
            let chunk = cin_g * opts.kernel;
            let norms: Vec<f32> = store
                .value(v)
                .chunks(chunk)
                .map(|r| libm::sqrtf(r.iter().map(|a| a * a).sum()))
                .collect();
            let g = store.add(format!("{name}.weight_g"), vec![out_channels], norms);
            (v, Some(g))
        } else {
            (store.add_uniform(format!("{name}.weight"), shape, bound, rng), None)
        };
        let bias = store.add_uniform(format!("{name}.bias"), vec![out_channels], bound, rng);
        Self {
            in_channels,
            out_channels,
            kernel: opts.kernel,
            stride: opts.stride,
            dilation: opts.dilation,
            groups: opts.groups,
            padding: opts.padding,
            weight,
            gain,
            bias,
        }
    }

    pub fn weight_id(&self) -> ParamId {
        self.weight
    }

    pub fn gain_id(&self) -> Option<ParamId> {
        self.gain
    }

    pub fn bias_id(&self) -> ParamId {
        self.bias
    }

    /// Output length and left padding for an input of `len` samples.
    pub fn geometry(&self, len: usize) -> (usize, usize) {
        let span = self.dilation * (self.kernel - 1) + 1;
        match self.padding {
            Padding::Same => {
                let out = len.div_ceil(self.stride);
                let total = ((out - 1) * self.stride + span).saturating_sub(len);
                (out, total / 2)
            }
            Padding::Explicit(l, r) => ((len + l + r - span) / self.stride + 1, l),
        }
    }

    fn chunk(&self) -> usize {
        self.in_channels / self.groups * self.kernel
    }

    /// Effective kernel (after weight normalization, if any).
    pub fn effective_weight(&self, store: &ParamStore) -> Vec<f32> {
        match self.gain {
            Some(g) => weight_norm(store.value(self.weight), store.value(g), self.chunk()).0,
            None => store.value(self.weight).to_vec(),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let y = self.apply(store, x)?;
        let (out_len, pad_left) = self.geometry(x.len());
        Ok((
            y,
            ConvCache {
                input: x.clone(),
                pad_left,
                out_len,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn apply(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            bail!(
                Shape,
                "conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            );
        }
        let span = self.dilation * (self.kernel - 1) + 1;
        if matches!(self.padding, Padding::Explicit(l, r) if x.len() + l + r < span) || x.is_empty() {
            bail!(Shape, "input of length {} is shorter than the kernel span {span}", x.len());
        }
        let (out_len, pad_left) = self.geometry(x.len());
        let w = self.effective_weight(store);
        let bias = store.value(self.bias);
        let (cin_g, cout_g) = (self.in_channels / self.groups, self.out_channels / self.groups);
        let kc = cin_g * self.kernel;
        let geom = Geometry {
            channels: cin_g,
            long: x.len(),
            short: out_len,
            kernel: self.kernel,
            stride: self.stride,
            dilation: self.dilation,
            pad_left,
        };
        let pointwise = self.kernel == 1 && self.stride == 1 && pad_left == 0;
        let mut col = if pointwise { Vec::new() } else { vec![0.0; kc * out_len] };
        let mut y = Tensor::zeros(x.batch(), self.out_channels, out_len);
        for b in 0..x.batch() {
            let xb = x.item(b);
            let yb = y.item_mut(b);
            for g in 0..self.groups {
                let xg = &xb[g * cin_g * x.len()..(g + 1) * cin_g * x.len()];
                let cols: &[f32] = if pointwise {
                    xg
                } else {
                    im2col(xg, geom, &mut col);
                    &col
                };
                let yg = &mut yb[g * cout_g * out_len..(g + 1) * cout_g * out_len];
                for (o, row) in yg.chunks_mut(out_len).enumerate() {
                    row.fill(bias[g * cout_g + o]);
                }
                let wg = &w[g * cout_g * kc..(g + 1) * cout_g * kc];
                gemm(
                    MatRef::new(wg, cout_g, kc),
                    MatRef::new(cols, kc, out_len),
                    1.0,
                    MatMut::new(yg, cout_g, out_len),
                );
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients (when `param_grads`) and returns the
    /// input gradient (when `input_grad`).
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &ConvCache,
        dy: &Tensor,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Tensor> {
        let x = &cache.input;
        let out_len = cache.out_len;
        assert_eq!(dy.shape(), (x.batch(), self.out_channels, out_len));
        let w = self.effective_weight(store);
        let (cin_g, cout_g) = (self.in_channels / self.groups, self.out_channels / self.groups);
        let kc = cin_g * self.kernel;
        let geom = Geometry {
            channels: cin_g,
            long: x.len(),
            short: out_len,
            kernel: self.kernel,
            stride: self.stride,
            dilation: self.dilation,
            pad_left: cache.pad_left,
        };
        let mut dw = if param_grads { vec![0.0; w.len()] } else { Vec::new() };
        let mut dbias = vec![0.0; self.out_channels];
        let mut dx = input_grad.then(|| x.zeros_like());
        let mut col = vec![0.0; kc * out_len];
        for b in 0..x.batch() {
            let xb = x.item(b);
            let dyb = dy.item(b);
            for g in 0..self.groups {
                let dyg = &dyb[g * cout_g * out_len..(g + 1) * cout_g * out_len];
                if param_grads {
                    for (o, row) in dyg.chunks(out_len).enumerate() {
                        dbias[g * cout_g + o] += row.iter().sum::<f32>();
                    }
                    let xg = &xb[g * cin_g * x.len()..(g + 1) * cin_g * x.len()];
                    im2col(xg, geom, &mut col);
                    gemm(
                        MatRef::new(dyg, cout_g, out_len),
                        MatRef::transposed(&col, out_len, kc),
                        1.0,
                        MatMut::new(&mut dw[g * cout_g * kc..(g + 1) * cout_g * kc], cout_g, kc),
                    );
                }
                if let Some(dx) = dx.as_mut() {
                    let wg = &w[g * cout_g * kc..(g + 1) * cout_g * kc];
                    gemm(
                        MatRef::transposed(wg, kc, cout_g),
                        MatRef::new(dyg, cout_g, out_len),
                        0.0,
                        MatMut::new(&mut col, kc, out_len),
                    );
                    let dxb = dx.item_mut(b);
                    col2im(
                        &col,
                        geom,
                        &mut dxb[g * cin_g * x.len()..(g + 1) * cin_g * x.len()],
                    );
                }
            }
        }
        if param_grads {
            add_into(store, self.bias, &dbias);
            match self.gain {
                Some(g) => weight_norm_backward(store, self.weight, g, &dw, self.chunk()),
                None => add_into(store, self.weight, &dw),
            }
        }
        dx
    }

    pub fn num_params(&self) -> usize {
        let w = self.out_channels * self.in_channels / self.groups * self.kernel;
        w + self.out_channels + if self.gain.is_some() { self.out_channels } else { 0 }
    }
}

/// Transposed 1-D convolution (the adjoint of a strided convolution), with
/// weight layout `(in, out, kernel)` and optional weight normalization over
/// each input channel's slice.
#[derive(Clone, Debug)]
pub struct ConvTranspose1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    crop_left: usize,
    crop_right: usize,
    weight: ParamId,
    gain: Option<ParamId>,
    bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct ConvTransposeCache {
    input: Tensor,
}

impl ConvTranspose1d {
    /// Upsampling layer with output length exactly `stride * len`
    /// (requires `kernel >= stride`).
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        weight_norm: bool,
    ) -> Self {
        assert!(kernel >= stride && stride > 0);
        let bound = 1.0 / libm::sqrtf((in_channels * kernel) as f32);
        let shape = vec![in_channels, out_channels, kernel];
        let (weight, gain) = if weight_norm {
            let v = store.add_uniform(format!("{name}.weight_v"), shape, bound, rng);
            let chunk = out_channels * kernel;
            let norms: Vec<f32> = store
                .value(v)
                .chunks(chunk)
                .map(|r| libm::sqrtf(r.iter().map(|a| a * a).sum()))
                .collect();
            let g = store.add(format!("{name}.weight_g"), vec![in_channels], norms);
            (v, Some(g))
        } else {
            (store.add_uniform(format!("{name}.weight"), shape, bound, rng), None)
        };
        let bias = store.add_uniform(format!("{name}.bias"), vec![out_channels], bound, rng);
        let crop = kernel - stride;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            crop_left: crop / 2,
            crop_right: crop - crop / 2,
            weight,
            gain,
            bias,
        }
    }

    pub fn weight_id(&self) -> ParamId {
        self.weight
    }

    pub fn gain_id(&self) -> Option<ParamId> {
        self.gain
    }

    pub fn bias_id(&self) -> ParamId {
        self.bias
    }

    pub fn out_len(&self, len: usize) -> usize {
        (len - 1) * self.stride + self.kernel - self.crop_left - self.crop_right
    }

    fn chunk(&self) -> usize {
        self.out_channels * self.kernel
    }

    fn effective_weight(&self, store: &ParamStore) -> Vec<f32> {
        match self.gain {
            Some(g) => weight_norm(store.value(self.weight), store.value(g), self.chunk()).0,
            None => store.value(self.weight).to_vec(),
        }
    }

    fn geometry(&self, len: usize) -> Geometry {
        Geometry {
            channels: self.out_channels,
            long: self.out_len(len),
            short: len,
            kernel: self.kernel,
            stride: self.stride,
            dilation: 1,
            pad_left: self.crop_left,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, ConvTransposeCache)> {
        let y = self.apply(store, x)?;
        Ok((y, ConvTransposeCache { input: x.clone() }))
    }

    pub fn apply(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        if x.channels() != self.in_channels {
            bail!(
                Shape,
                "transposed conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            );
        }
        if x.is_empty() {
            bail!(Shape, "empty input to transposed conv");
        }
        let w = self.effective_weight(store);
        let bias = store.value(self.bias);
        let geom = self.geometry(x.len());
        let rows = self.out_channels * self.kernel;
        let mut col = vec![0.0; rows * x.len()];
        let mut y = Tensor::zeros(x.batch(), self.out_channels, geom.long);
        for b in 0..x.batch() {
            gemm(
                MatRef::transposed(&w, rows, self.in_channels),
                MatRef::new(x.item(b), self.in_channels, x.len()),
                0.0,
                MatMut::new(&mut col, rows, x.len()),
            );
            let yb = y.item_mut(b);
            for (o, row) in yb.chunks_mut(geom.long).enumerate() {
                row.fill(bias[o]);
            }
            col2im(&col, geom, yb);
        }
        Ok(y)
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &ConvTransposeCache,
        dy: &Tensor,
        param_grads: bool,
        input_grad: bool,
    ) -> Option<Tensor> {
        let x = &cache.input;
        let geom = self.geometry(x.len());
        assert_eq!(dy.shape(), (x.batch(), self.out_channels, geom.long));
        let w = self.effective_weight(store);
        let rows = self.out_channels * self.kernel;
        let mut dcol = vec![0.0; rows * x.len()];
        let mut dw = if param_grads { vec![0.0; w.len()] } else { Vec::new() };
        let mut dbias = vec![0.0; self.out_channels];
        let mut dx = input_grad.then(|| x.zeros_like());
        for b in 0..x.batch() {
            let dyb = dy.item(b);
            im2col(dyb, geom, &mut dcol);
            if let Some(dx) = dx.as_mut() {
                gemm(
                    MatRef::new(&w, self.in_channels, rows),
                    MatRef::new(&dcol, rows, x.len()),
                    0.0,
                    MatMut::new(dx.item_mut(b), self.in_channels, x.len()),
                );
            }
            if param_grads {
                for (o, row) in dyb.chunks(geom.long).enumerate() {
                    dbias[o] += row.iter().sum::<f32>();
                }
                gemm(
                    MatRef::new(&dcol, rows, x.len()),
                    MatRef::transposed(x.item(b), x.len(), self.in_channels),
                    1.0,
                    MatMut {
                        data: &mut dw,
                        rows,
                        cols: self.in_channels,
                        rs: 1,
                        cs: rows,
                    },
                );
            }
        }
        if param_grads {
            add_into(store, self.bias, &dbias);
            match self.gain {
                Some(g) => weight_norm_backward(store, self.weight, g, &dw, self.chunk()),
                None => add_into(store, self.weight, &dw),
            }
        }
        dx
    }

    pub fn num_params(&self) -> usize {
        let w = self.in_channels * self.out_channels * self.kernel;
        w + self.out_channels + if self.gain.is_some() { self.in_channels } else { 0 }
    }
}
