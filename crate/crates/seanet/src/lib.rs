//! Files, datasets, training runs and evaluation for the multimodal
//! speech enhancer whose algorithms live in [`seanet_core`].
//!
//! The `seanet` binary wraps these modules as `make-mixtures`, `train`,
//! `train-accel-synth`, `denoise` and `evaluate`.

pub mod audio;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod infer;
pub mod manifest;
pub mod trainer;

pub use error::{Error, Result};
pub use seanet_core as core;
