//! Algorithmic core of a multimodal (microphone + bone-conduction accelerometer)
//! speech enhancement GAN.
//!
//! Everything here is a pure function of its inputs: signal conditioning,
//! the SI-SDR metric, the hinge and feature-matching losses, a small
//! explicit-backprop convolution engine, the conditional UNet generator,
//! the multi-scale discriminator and a single optimization step. File
//! formats, datasets and the command line live in the `seanet` crate.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only
//! enables runtime SIMD detection in the matrix multiply kernel.
#![no_std]
#![deny(rust_2018_idioms)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod error;
pub mod example;
pub mod losses;
pub mod metrics;
pub mod mixing;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod train;
pub mod waveform;

pub use error::{Error, Result};
pub use example::TrainingExample;
pub use losses::LossReport;
pub use model::{
    DiscriminatorOutput, DiscriminatorSpec, Generator, GeneratorSpec, MultiScaleDiscriminator,
    ScaleOutput,
};
pub use nn::Tensor;
pub use train::{TrainConfig, TrainState};
pub use waveform::Waveform;
