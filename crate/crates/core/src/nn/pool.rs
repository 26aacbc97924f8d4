use super::Tensor;

// kernel 4, stride 2, one sample of implicit padding on each side; padded
// positions are excluded from the average.
const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;

fn window(t: usize, len: usize) -> (usize, usize) {
    let start = (t * STRIDE).saturating_sub(PAD);
    let end = (t * STRIDE + KERNEL - PAD).min(len);
    (start, end)
}

pub fn pooled_len(len: usize) -> usize {
    (len + 2 * PAD - KERNEL) / STRIDE + 1
}

/// Average pooling that halves the time resolution.
pub fn avg_pool(x: &Tensor) -> Tensor {
    let (batch, c, len) = x.shape();
    let out_len = pooled_len(len);
    let mut y = Tensor::zeros(batch, c, out_len);
    for b in 0..batch {
        for ch in 0..c {
            let src = x.row(b, ch);
            for (t, o) in y.row_mut(b, ch).iter_mut().enumerate() {
                let (s, e) = window(t, len);
                *o = src[s..e].iter().sum::<f32>() / (e - s) as f32;
            }
        }
    }
    y
}

pub fn avg_pool_backward(dy: &Tensor, in_len: usize) -> Tensor {
    let (batch, c, _) = dy.shape();
    let mut dx = Tensor::zeros(batch, c, in_len);
    for b in 0..batch {
        for ch in 0..c {
            let g = dy.row(b, ch).to_vec();
            let dst = dx.row_mut(b, ch);
            for (t, d) in g.iter().enumerate() {
                let (s, e) = window(t, in_len);
                let share = d / (e - s) as f32;
                dst[s..e].iter_mut().for_each(|v| *v += share);
            }
        }
    }
    dx
}
