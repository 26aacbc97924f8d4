//! A minimal convolutional network engine with hand-written backward passes.
//!
//! Tensors are dense `(batch, channels, time)` buffers. Layers return a cache
//! from `forward` which `backward` consumes; parameter gradients accumulate
//! into a [`ParamStore`].

mod activation;
mod adam;
mod conv;
mod gemm;
mod norm;
mod param;
mod pool;
mod tensor;

pub use activation::{elu, elu_backward, leaky_relu, leaky_relu_backward, tanh, tanh_backward};
pub use adam::{Adam, AdamConfig, AdamState};
pub use conv::{Conv1d, ConvCache, ConvOptions, ConvTranspose1d, ConvTransposeCache, Padding};
pub use norm::{ChannelLayerNorm, LayerNormCache};
pub use param::{Param, ParamId, ParamStore};
pub use pool::{avg_pool, avg_pool_backward, pooled_len};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
