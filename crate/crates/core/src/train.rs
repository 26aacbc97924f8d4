//! One alternating optimization step of the adversarial objective.

use alloc::string::ToString;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::losses::{self, LossReport, DEFAULT_LAMBDA};
use crate::model::{DiscriminatorSpec, Generator, GeneratorSpec, MultiScaleDiscriminator};
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub total_steps: u64,
    pub lambda: f32,
    pub seed: u64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            total_steps: 200_000,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            checkpoint_every: 10_000,
        }
    }
}

impl TrainConfig {
    /// Schedule for the large synthetic-accelerometer corpus.
    pub fn large_corpus() -> Self {
        Self {
            total_steps: 2_000_000,
            ..Self::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(Config, "batch size must be at least 1");
        }
        if self.total_steps == 0 {
            bail!(Config, "total steps must be at least 1");
        }
        if self.checkpoint_every == 0 {
            bail!(Config, "checkpoint interval must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bail!(Config, "learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            bail!(Config, "Adam betas must lie in [0, 1)");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!(Config, "lambda must be non-negative");
        }
        Ok(())
    }
}

/// Networks, optimizer moments and the step counter. The data order is a
/// pure function of `(config.seed, step)`, so this is everything needed
/// to continue a run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub step: u64,
    pub config: TrainConfig,
    pub generator: Generator,
    pub discriminator: MultiScaleDiscriminator,
    pub generator_opt: Adam,
    pub discriminator_opt: Adam,
}

impl TrainState {
    pub fn new(config: TrainConfig, generator: GeneratorSpec, discriminator: DiscriminatorSpec) -> Result<Self> {
        config.validate()?;
        if generator.out_channels != 1 {
            bail!(Config, "the discriminator judges single-channel output");
        }
        let g = Generator::new(generator, derive_seed(config.seed, 1))?;
        let d = MultiScaleDiscriminator::new(discriminator, derive_seed(config.seed, 2))?;
        Ok(Self::from_parts(config, g, d, 0))
    }

    pub fn from_parts(config: TrainConfig, generator: Generator, discriminator: MultiScaleDiscriminator, step: u64) -> Self {
        let generator_opt = Adam::new(config.adam(), generator.params());
        let discriminator_opt = Adam::new(config.adam(), discriminator.params());
        Self {
            step,
            config,
            generator,
            discriminator,
            generator_opt,
            discriminator_opt,
        }
    }

    /// One discriminator update then one generator update on the same batch.
    ///
    /// `input` is `(B, in_channels, T)` with the speech channel first;
    /// `target` is `(B, 1, T)`. Gradients of the last update stay in the
    /// parameter stores until the next step.
    pub fn train_step(&mut self, input: &Tensor, target: &Tensor) -> Result<LossReport> {
        if target.channels() != 1 || target.batch() != input.batch() || target.len() != input.len() {
            bail!(
                Shape,
                "target {:?} does not match input {:?}",
                target.shape(),
                input.shape()
            );
        }
        let step = self.step + 1;
        let lambda = self.config.lambda;

        let (fake, g_cache) = self.generator.forward(input)?;
        if !fake.is_finite() {
            return Err(non_finite(step, "generator output", fake.max_abs()));
        }

        let (real_out, real_cache) = self.discriminator.forward(target)?;
        let (fake_out, fake_cache) = self.discriminator.forward(&fake)?;
        let (d_loss, g_real, g_fake) = losses::discriminator_loss_with_grad(&real_out, &fake_out)?;
        if !d_loss.is_finite() {
            let worst = real_out.max_abs().max(fake_out.max_abs());
            return Err(non_finite(step, "discriminator loss", worst));
        }
        self.discriminator.params_mut().zero_grad();
        self.discriminator.backward(&real_cache, &g_real, true, false);
        self.discriminator.backward(&fake_cache, &g_fake, true, false);
        self.discriminator_opt.step(self.discriminator.params_mut());
        drop((real_cache, fake_cache));

        let real_out = self.discriminator.apply(target)?;
        let (fake_out, fake_cache) = self.discriminator.forward(&fake)?;
        let (adv, rec, grad) = losses::generator_loss_with_grad(&real_out, &fake_out, lambda)?;
        let report = LossReport::new(d_loss, adv, rec, lambda);
        if !report.is_finite() {
            let worst = real_out.max_abs().max(fake_out.max_abs());
            return Err(non_finite(step, "generator loss", worst));
        }
        let d_fake = self
            .discriminator
            .backward(&fake_cache, &grad, false, true)
            .expect("input gradient requested");
        self.generator.params_mut().zero_grad();
        self.generator.backward(&g_cache, &d_fake, false);
        self.generator_opt.step(self.generator.params_mut());

        self.step = step;
        Ok(report)
    }
}

fn non_finite(step: u64, component: &str, max_abs_activation: f32) -> Error {
    Error::NonFinite {
        step,
        component: component.to_string(),
        max_abs_activation,
    }
}
