use super::Tensor;

fn map(x: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = f(*v));
    y
}

/// `dx = dy * f'(y)`, expressed through the forward output `y`.
fn chain(y: &Tensor, dy: &Tensor, df: impl Fn(f32) -> f32) -> Tensor {
    assert_eq!(y.shape(), dy.shape());
    let mut dx = dy.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
        *d *= df(o);
    }
    dx
}

pub fn elu(x: &Tensor) -> Tensor {
    map(x, |v| if v > 0.0 { v } else { libm::expm1f(v) })
}

/// Backward through ELU given its output.
pub fn elu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    chain(y, dy, |o| if o > 0.0 { 1.0 } else { o + 1.0 })
}

pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    map(x, |v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(y: &Tensor, dy: &Tensor, slope: f32) -> Tensor {
    chain(y, dy, |o| if o > 0.0 { 1.0 } else { slope })
}

pub fn tanh(x: &Tensor) -> Tensor {
    map(x, libm::tanhf)
}

pub fn tanh_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    chain(y, dy, |o| 1.0 - o * o)
}
