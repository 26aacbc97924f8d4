//! Hinge adversarial losses and the discriminator feature-matching loss.
//!
//! Every loss averages over scales, over layers (feature loss) and over all
//! elements of each logit sequence or feature map, batch included. The
//! `*_with_grad` variants also return the gradient with respect to the
//! discriminator outputs, ready for [`MultiScaleDiscriminator::backward`].
//!
//! [`MultiScaleDiscriminator::backward`]: crate::model::MultiScaleDiscriminator::backward

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::model::DiscriminatorOutput;
use crate::nn::Tensor;

/// Weight of the reconstruction term in the generator objective.
pub const DEFAULT_LAMBDA: f32 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub d_loss: f32,
    pub g_adv_loss: f32,
    pub g_rec_loss: f32,
    pub g_total: f32,
    pub lambda: f32,
}

impl LossReport {
    pub fn new(d_loss: f32, g_adv_loss: f32, g_rec_loss: f32, lambda: f32) -> Self {
        Self {
            d_loss,
            g_adv_loss,
            g_rec_loss,
            g_total: generator_total_loss(g_adv_loss, g_rec_loss, lambda),
            lambda,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.d_loss, self.g_adv_loss, self.g_rec_loss, self.g_total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn check_scales(a: &DiscriminatorOutput, b: &DiscriminatorOutput) -> Result<()> {
    if a.num_scales() != b.num_scales() {
        bail!(Shape, "scale count mismatch: {} vs {}", a.num_scales(), b.num_scales());
    }
    if a.num_scales() == 0 {
        bail!(Shape, "discriminator output has no scales");
    }
    Ok(())
}

/// Mean of `max(0, 1 + sign * x)` over all logits, and optionally its
/// gradient scaled by `weight`.
fn hinge(logits: &Tensor, sign: f32, weight: f64, grad: Option<&mut Tensor>) -> f64 {
    let n = logits.numel().max(1) as f64;
    let sum: f64 = logits
        .data()
        .iter()
        .map(|&x| f64::from((1.0 + sign * x).max(0.0)))
        .sum();
    if let Some(g) = grad {
        let step = (weight / n) as f32 * sign;
        for (gv, &x) in g.data_mut().iter_mut().zip(logits.data()) {
            // one-sided subgradient: zero on the kink
            *gv += if 1.0 + sign * x > 0.0 { step } else { 0.0 };
        }
    }
    sum / n
}

fn hinge_over_scales(out: &DiscriminatorOutput, sign: f32, mut grad: Option<&mut DiscriminatorOutput>) -> f64 {
    let k = out.num_scales() as f64;
    let mut total = 0.0;
    for (i, s) in out.scales.iter().enumerate() {
        let g = grad.as_deref_mut().map(|g| &mut g.scales[i].logits);
        total += hinge(&s.logits, sign, 1.0 / k, g);
    }
    total / k
}

/// Hinge loss of the discriminator on real and generated audio.
pub fn discriminator_loss(real: &DiscriminatorOutput, fake: &DiscriminatorOutput) -> Result<f32> {
    check_scales(real, fake)?;
    Ok((hinge_over_scales(real, -1.0, None) + hinge_over_scales(fake, 1.0, None)) as f32)
}

pub fn discriminator_loss_with_grad(
    real: &DiscriminatorOutput,
    fake: &DiscriminatorOutput,
) -> Result<(f32, DiscriminatorOutput, DiscriminatorOutput)> {
    check_scales(real, fake)?;
    let mut g_real = real.zeros_like();
    let mut g_fake = fake.zeros_like();
    let loss = hinge_over_scales(real, -1.0, Some(&mut g_real)) + hinge_over_scales(fake, 1.0, Some(&mut g_fake));
    Ok((loss as f32, g_real, g_fake))
}

/// Adversarial loss of the generator, in the same hinge form:
/// mean of `max(0, 1 - D(G(x)))`.
pub fn generator_adversarial_loss(fake: &DiscriminatorOutput) -> f32 {
    hinge_over_scales(fake, -1.0, None) as f32
}

pub fn generator_adversarial_loss_with_grad(fake: &DiscriminatorOutput) -> (f32, DiscriminatorOutput) {
    let mut g = fake.zeros_like();
    let loss = hinge_over_scales(fake, -1.0, Some(&mut g));
    (loss as f32, g)
}

fn feature_matching(
    real: &DiscriminatorOutput,
    fake: &DiscriminatorOutput,
    weight: f64,
    mut grad: Option<&mut DiscriminatorOutput>,
) -> Result<f64> {
    check_scales(real, fake)?;
    let k = real.num_scales() as f64;
    let mut total = 0.0;
    for (si, (r, f)) in real.scales.iter().zip(&fake.scales).enumerate() {
        if r.features.len() != f.features.len() || r.features.is_empty() {
            bail!(Shape, "feature layer count mismatch at scale {si}");
        }
        let layers = r.features.len() as f64;
        let mut scale_sum = 0.0;
        for (li, (rl, fl)) in r.features.iter().zip(&f.features).enumerate() {
            if rl.shape() != fl.shape() {
                bail!(Shape, "feature map shape mismatch at scale {si}, layer {li}");
            }
            let n = rl.numel().max(1) as f64;
            let l1: f64 = rl
                .data()
                .iter()
                .zip(fl.data())
                .map(|(&a, &b)| f64::from((a - b).abs()))
                .sum();
            scale_sum += l1 / n;
            if let Some(g) = grad.as_deref_mut() {
                let step = (weight / (k * layers * n)) as f32;
                let gl = &mut g.scales[si].features[li];
                for ((gv, &a), &b) in gl.data_mut().iter_mut().zip(rl.data()).zip(fl.data()) {
                    let diff = b - a;
                    *gv += if diff > 0.0 {
                        step
                    } else if diff < 0.0 {
                        -step
                    } else {
                        0.0
                    };
                }
            }
        }
        total += scale_sum / layers;
    }
    Ok(total / k)
}

/// Mean absolute difference between discriminator feature maps of the
/// target and the generated audio, averaged over layers and scales.
pub fn feature_matching_loss(real: &DiscriminatorOutput, fake: &DiscriminatorOutput) -> Result<f32> {
    Ok(feature_matching(real, fake, 1.0, None)? as f32)
}

/// Loss and its gradient with respect to the generated-audio outputs.
pub fn feature_matching_loss_with_grad(
    real: &DiscriminatorOutput,
    fake: &DiscriminatorOutput,
) -> Result<(f32, DiscriminatorOutput)> {
    let mut g = fake.zeros_like();
    let loss = feature_matching(real, fake, 1.0, Some(&mut g))?;
    Ok((loss as f32, g))
}

pub fn generator_total_loss(adv: f32, rec: f32, lambda: f32) -> f32 {
    adv + lambda * rec
}

/// Loss of the generator update and the gradient of
/// `adv + lambda * rec` with respect to the generated-audio outputs.
pub fn generator_loss_with_grad(
    real: &DiscriminatorOutput,
    fake: &DiscriminatorOutput,
    lambda: f32,
) -> Result<(f32, f32, DiscriminatorOutput)> {
    check_scales(real, fake)?;
    let mut g = fake.zeros_like();
    let adv = hinge_over_scales(fake, -1.0, Some(&mut g));
    let rec = feature_matching(real, fake, f64::from(lambda), Some(&mut g))?;
    Ok((adv as f32, rec as f32, g))
}
