use proptest::prelude::*;
use seanet_core::losses::*;
use seanet_core::{DiscriminatorOutput, ScaleOutput, Tensor};

fn logits(values: &[f32]) -> Tensor {
    Tensor::from_vec(1, 1, values.len(), values.to_vec()).unwrap()
}

fn output(scales: &[&[f32]]) -> DiscriminatorOutput {
    DiscriminatorOutput {
        scales: scales
            .iter()
            .map(|s| ScaleOutput {
                logits: logits(s),
                features: vec![logits(s)],
            })
            .collect(),
    }
}

fn with_features(logit: &[f32], features: Vec<Tensor>) -> DiscriminatorOutput {
    DiscriminatorOutput {
        scales: vec![ScaleOutput {
            logits: logits(logit),
            features,
        }],
    }
}

#[test]
fn discriminator_hinge_examples() {
    let real = output(&[&[1.0; 5], &[1.0; 3]]);
    let fake = output(&[&[-1.0; 5], &[-1.0; 3]]);
    assert_eq!(discriminator_loss(&real, &fake).unwrap(), 0.0);

    let zeros = output(&[&[0.0; 4]]);
    assert_eq!(discriminator_loss(&zeros, &zeros).unwrap(), 2.0);

    let real = output(&[&[1.0, 1.0], &[-1.0, -1.0]]);
    let fake = output(&[&[-1.0, -3.0], &[-2.0, -1.0]]);
    assert_eq!(discriminator_loss(&real, &fake).unwrap(), 1.0);
}

#[test]
fn generator_hinge_examples() {
    assert_eq!(generator_adversarial_loss(&output(&[&[1.0; 4]])), 0.0);
    assert_eq!(generator_adversarial_loss(&output(&[&[0.0; 4]])), 1.0);
    assert_eq!(generator_adversarial_loss(&output(&[&[-2.0; 4]])), 3.0);
}

#[test]
fn feature_matching_examples() {
    let a = with_features(&[0.0], vec![logits(&[0.1, 0.2, 0.3, 0.4])]);
    let b = with_features(&[0.0], vec![logits(&[0.6, 0.7, 0.8, 0.9])]);
    assert!((feature_matching_loss(&a, &b).unwrap() - 0.5).abs() < 1e-7);
    assert_eq!(feature_matching_loss(&a, &a).unwrap(), 0.0);

    let a2 = with_features(&[0.0], vec![logits(&[0.2, 0.4, 0.6, 0.8])]);
    let b2 = with_features(&[0.0], vec![logits(&[1.2, 1.4, 1.6, 1.8])]);
    assert!((feature_matching_loss(&a2, &b2).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn total_loss_examples() {
    assert!((generator_total_loss(0.2, 0.01, 100.0) - 1.2).abs() < 1e-6);
    assert_eq!(generator_total_loss(0.7, 0.3, 0.0), 0.7);
    assert_eq!(DEFAULT_LAMBDA, 100.0);
    let r = LossReport::new(0.5, 0.2, 0.01, DEFAULT_LAMBDA);
    assert_eq!(r.g_total, r.g_adv_loss + r.lambda * r.g_rec_loss);
}

#[test]
fn mismatched_shapes_are_rejected() {
    let one = output(&[&[0.0; 4]]);
    let two = output(&[&[0.0; 4], &[0.0; 2]]);
    assert_eq!(discriminator_loss(&one, &two).unwrap_err().category(), "shape");
    let short = with_features(&[0.0], vec![logits(&[0.0; 3])]);
    let long = with_features(&[0.0], vec![logits(&[0.0; 4])]);
    assert_eq!(feature_matching_loss(&short, &long).unwrap_err().category(), "shape");
}

/// Central difference of `f` at `x[i]`; the losses are piecewise linear so
/// a wide step is exact away from kinks.
fn numeric_grad(x: &[f32], i: usize, f: &dyn Fn(&[f32]) -> f32) -> f64 {
    let h = 1e-2f32;
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[i] += h;
    m[i] -= h;
    (f64::from(f(&p)) - f64::from(f(&m))) / (2.0 * f64::from(h))
}

fn assert_rel(numeric: f64, analytic: f64) {
    let scale = numeric.abs().max(analytic.abs());
    if scale == 0.0 {
        return;
    }
    assert!((numeric - analytic).abs() / scale < 1e-4, "{numeric} vs {analytic}");
}

// values stay at least 0.05 from every hinge kink and from equal features
const REAL: [f32; 6] = [0.3, 1.4, -0.6, 0.9, 2.1, -1.7];
const FAKE: [f32; 6] = [-0.2, 0.7, -1.5, 0.4, 1.3, -0.4];

#[test]
fn discriminator_loss_gradient_matches_finite_differences() {
    let (_, g_real, g_fake) = discriminator_loss_with_grad(&output(&[&REAL]), &output(&[&FAKE])).unwrap();
    for i in 0..REAL.len() {
        let n = numeric_grad(&REAL, i, &|r| discriminator_loss(&output(&[r]), &output(&[&FAKE])).unwrap());
        assert_rel(n, f64::from(g_real.scales[0].logits.data()[i]));
        let n = numeric_grad(&FAKE, i, &|f| discriminator_loss(&output(&[&REAL]), &output(&[f])).unwrap());
        assert_rel(n, f64::from(g_fake.scales[0].logits.data()[i]));
    }
}

#[test]
fn generator_loss_gradients_match_finite_differences() {
    let (_, g) = generator_adversarial_loss_with_grad(&output(&[&FAKE]));
    for i in 0..FAKE.len() {
        let n = numeric_grad(&FAKE, i, &|f| generator_adversarial_loss(&output(&[f])));
        assert_rel(n, f64::from(g.scales[0].logits.data()[i]));
    }

    let real = with_features(&REAL, vec![logits(&REAL)]);
    let fake_out = |f: &[f32]| with_features(&FAKE, vec![logits(f)]);
    let (_, g) = feature_matching_loss_with_grad(&real, &fake_out(&FAKE)).unwrap();
    for i in 0..FAKE.len() {
        let n = numeric_grad(&FAKE, i, &|f| feature_matching_loss(&real, &fake_out(f)).unwrap());
        assert_rel(n, f64::from(g.scales[0].features[0].data()[i]));
    }

    // the combined gradient is adv + lambda * rec on the right tensors
    let lambda = 3.0;
    let fake = with_features(&FAKE, vec![logits(&FAKE)]);
    let (adv, rec, g) = generator_loss_with_grad(&real, &fake, lambda).unwrap();
    assert!((adv - generator_adversarial_loss(&fake)).abs() < 1e-7);
    assert!((rec - feature_matching_loss(&real, &fake).unwrap()).abs() < 1e-7);
    for i in 0..FAKE.len() {
        let n = numeric_grad(&FAKE, i, &|f| {
            let o = with_features(f, vec![logits(&FAKE)]);
            generator_adversarial_loss(&o)
        });
        assert_rel(n, f64::from(g.scales[0].logits.data()[i]));
        let n = numeric_grad(&FAKE, i, &|f| lambda * feature_matching_loss(&real, &fake_out(f)).unwrap());
        assert_rel(n, f64::from(g.scales[0].features[0].data()[i]));
    }
}

#[test]
fn kink_uses_zero_subgradient() {
    let (_, g) = generator_adversarial_loss_with_grad(&output(&[&[1.0, 0.0]]));
    assert_eq!(g.scales[0].logits.data(), &[0.0, -0.5]);
}

fn small_vec() -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-3.0f32..3.0, 1..12)
}

proptest! {
    #[test]
    fn losses_are_non_negative(r in small_vec(), f in small_vec()) {
        let real = output(&[&r]);
        let fake = output(&[&f]);
        prop_assert!(discriminator_loss(&real, &fake).unwrap() >= 0.0);
        prop_assert!(generator_adversarial_loss(&fake) >= 0.0);
        let fake_same = output(&[&r.iter().map(|v| v * 0.5 + 0.1).collect::<Vec<_>>()]);
        prop_assert!(feature_matching_loss(&real, &fake_same).unwrap() >= 0.0);
    }

    #[test]
    fn duplicating_logits_leaves_hinge_losses_unchanged(r in small_vec(), f in small_vec()) {
        let dup = |v: &[f32]| v.iter().flat_map(|&x| [x, x]).collect::<Vec<f32>>();
        let (rd, fd) = (dup(&r), dup(&f));
        let a = discriminator_loss(&output(&[&r]), &output(&[&f])).unwrap();
        let b = discriminator_loss(&output(&[&rd]), &output(&[&fd])).unwrap();
        prop_assert!((a - b).abs() < 1e-5);
        let a = generator_adversarial_loss(&output(&[&f]));
        let b = generator_adversarial_loss(&output(&[&fd]));
        prop_assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn feature_loss_is_homogeneous(r in small_vec(), c in 0.1f32..5.0) {
        let f: Vec<f32> = r.iter().map(|v| v * 0.3 - 0.2).collect();
        let scaled = |v: &[f32]| v.iter().map(|x| x * c).collect::<Vec<f32>>();
        let base = feature_matching_loss(&output(&[&r]), &output(&[&f])).unwrap();
        let s = feature_matching_loss(&output(&[&scaled(&r)]), &output(&[&scaled(&f)])).unwrap();
        prop_assert!((s - c * base).abs() <= 1e-4 * (1.0 + s.abs()));
    }
}
