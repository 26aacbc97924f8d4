//! The conditional UNet generator and the multi-resolution discriminator.

mod discriminator;
mod generator;
mod spec;

pub use discriminator::{DiscriminatorCache, DiscriminatorOutput, MultiScaleDiscriminator, ScaleOutput};
pub use generator::{Generator, GeneratorCache};
pub use spec::{DiscriminatorSpec, GeneratorSpec};
