use seanet_core::model::*;
use seanet_core::rng::{seeded, symmetric_f32};
use seanet_core::Tensor;

fn random_input(seed: u64, b: usize, c: usize, t: usize) -> Tensor {
    let mut rng = seeded(seed);
    Tensor::from_vec(b, c, t, (0..b * c * t).map(|_| symmetric_f32(&mut rng, 0.5)).collect()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn small_generator(seed: u64) -> Generator {
    Generator::new(GeneratorSpec::conditional(1).with_base_channels(4), seed).unwrap()
}

#[test]
fn generator_preserves_length() {
    let g = small_generator(0);
    for t in [256, 2560, 16384] {
        let y = g.infer(&random_input(1, 1, 2, t)).unwrap();
        assert_eq!(y.shape(), (1, 1, t));
        assert!(y.data().iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn generator_bottleneck_is_total_stride_down() {
    let g = small_generator(0);
    let (_, cache) = g.forward(&random_input(1, 2, 2, 1024)).unwrap();
    assert_eq!(cache.bottleneck_shape(), (2, 64, 4));
    assert_eq!(g.spec().total_stride(), 256);
    assert_eq!(GeneratorSpec::default().bottleneck_channels(), 512);
}

#[test]
fn generator_rejects_bad_shapes() {
    let g = small_generator(0);
    assert_eq!(g.infer(&random_input(1, 1, 2, 250)).unwrap_err().category(), "shape");
    assert_eq!(g.infer(&random_input(1, 1, 3, 256)).unwrap_err().category(), "shape");
}

#[test]
fn generator_is_shift_covariant() {
    let g = small_generator(4);
    let t = 8192;
    let x = random_input(2, 1, 2, t + 256);
    let a = x.narrow(0, t);
    let b = x.narrow(256, t);
    let ya = g.infer(&a).unwrap();
    let yb = g.infer(&b).unwrap();
    // yb[i] == ya[i + 256] away from the edges
    let mut worst = 0.0f32;
    for i in 2048..(t - 2048) {
        worst = worst.max((yb.row(0, 0)[i] - ya.row(0, 0)[i + 256]).abs());
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn accelerometer_channel_is_live() {
    let mut g = small_generator(1);
    let x = random_input(3, 1, 2, 1024);
    let (y, cache) = g.forward(&x).unwrap();
    let dy = random_input(4, 1, 1, y.len());
    let dx = g.backward(&cache, &dy, true).unwrap();
    let accel_norm: f64 = dx.row(0, 1).iter().map(|v| (*v as f64).powi(2)).sum();
    assert!(accel_norm > 0.0);
}

#[test]
fn outermost_skip_carries_only_speech() {
    let mut g = small_generator(2);
    let mut zeroed = 0;
    for p in g.params_mut().iter_mut().filter(|p| p.name.starts_with("decoder.")) {
        p.value.fill(0.0);
        zeroed += 1;
    }
    assert!(zeroed > 0);
    let x = random_input(5, 1, 2, 1024);
    let y = g.infer(&x).unwrap();
    let mut perturbed = x.clone();
    perturbed.row_mut(0, 1).iter_mut().for_each(|v| *v = -*v + 0.3);
    assert_eq!(g.infer(&perturbed).unwrap(), y);
    let mut speech = x.clone();
    speech.row_mut(0, 0)[500] += 0.5;
    assert_ne!(g.infer(&speech).unwrap(), y);
}

#[test]
fn generator_backward_matches_finite_differences() {
    let mut g = Generator::new(GeneratorSpec::conditional(1).with_base_channels(2), 9).unwrap();
    let x = random_input(6, 1, 2, 256);
    let (y, cache) = g.forward(&x).unwrap();
    let r = random_input(7, 1, 1, y.len());
    g.params_mut().zero_grad();
    let dx = g.backward(&cache, &r, true).unwrap();
    let v = random_input(8, 1, 2, 256);
    let h = 1e-2f32;
    let shifted = |s: f32| {
        let mut z = x.clone();
        z.data_mut().iter_mut().zip(v.data()).for_each(|(a, d)| *a += s * d);
        dot(&g.infer(&z).unwrap(), &r)
    };
    let numeric = (shifted(h) - shifted(-h)) / (2.0 * h as f64);
    let analytic = dot(&dx, &v);
    assert!((numeric - analytic).abs() < 2e-2 * analytic.abs().max(1e-2), "{numeric} vs {analytic}");

    // one parameter tensor from each end of the network
    for name in ["input.weight_g", "encoder.2.down.weight_v", "decoder.0.up.weight_v", "speech_skip.weight_v", "output.bias"] {
        let id = g.params().find(name).unwrap_or_else(|| panic!("{name}"));
        let grad = g.params().get(id).grad.clone();
        let dir: Vec<f32> = random_input(10, 1, 1, grad.len()).into_vec();
        let base = g.params().get(id).value.clone();
        let mut probe = |s: f32| {
            let p = &mut g.params_mut().get_mut(id).value;
            p.iter_mut().zip(&base).zip(&dir).for_each(|((a, b), d)| *a = b + s * d);
            dot(&g.infer(&x).unwrap(), &r)
        };
        let numeric = (probe(1e-3) - probe(-1e-3)) / 2e-3;
        probe(0.0);
        let analytic: f64 = grad.iter().zip(&dir).map(|(a, b)| *a as f64 * *b as f64).sum();
        assert!((numeric - analytic).abs() < 3e-2 * analytic.abs().max(1e-2), "{name}: {numeric} vs {analytic}");
    }
}

#[test]
fn discriminator_logit_counts_follow_stride_arithmetic() {
    let d = MultiScaleDiscriminator::new(DiscriminatorSpec::small(4, 64), 0).unwrap();
    let out = d.apply(&random_input(1, 1, 1, 16384)).unwrap();
    assert_eq!(out.num_scales(), 3);
    let lens: Vec<usize> = out.scales.iter().map(|s| s.logits.len()).collect();
    assert_eq!(lens, vec![64, 32, 16]);
    let layers = out.scales[0].features.len();
    assert!(out.scales.iter().all(|s| s.features.len() == layers));
    assert_eq!(layers, DiscriminatorSpec::default().num_feature_layers());

    let doubled = d.apply(&random_input(1, 1, 1, 32768)).unwrap();
    for (a, b) in out.scales.iter().zip(&doubled.scales) {
        assert!((b.logits.len() as i64 - 2 * a.logits.len() as i64).abs() <= 1);
    }
    assert_eq!(DiscriminatorSpec::default().scale_factors(), vec![1, 2, 4]);
}

#[test]
fn discriminator_rejects_multichannel_input() {
    let d = MultiScaleDiscriminator::new(DiscriminatorSpec::small(4, 64), 0).unwrap();
    assert_eq!(d.apply(&random_input(1, 1, 2, 4096)).unwrap_err().category(), "shape");
}

#[test]
fn discriminator_backward_matches_finite_differences() {
    // a unit slope makes the network smooth so finite differences do not
    // straddle activation kinks; the activation itself is checked elsewhere
    let spec = DiscriminatorSpec {
        leaky_slope: 1.0,
        ..DiscriminatorSpec::small(4, 16)
    };
    let mut d = MultiScaleDiscriminator::new(spec, 3).unwrap();
    let x = random_input(1, 1, 1, 1024);
    let (out, cache) = d.forward(&x).unwrap();
    let mut grad = out.zeros_like();
    let mut rng = seeded(12);
    for s in &mut grad.scales {
        s.logits.data_mut().iter_mut().for_each(|v| *v = symmetric_f32(&mut rng, 1.0));
        for f in &mut s.features {
            f.data_mut().iter_mut().for_each(|v| *v = symmetric_f32(&mut rng, 0.1));
        }
    }
    let objective = |o: &DiscriminatorOutput| -> f64 {
        o.scales
            .iter()
            .zip(&grad.scales)
            .map(|(a, g)| dot(&a.logits, &g.logits) + a.features.iter().zip(&g.features).map(|(p, q)| dot(p, q)).sum::<f64>())
            .sum()
    };
    let dx = d.backward(&cache, &grad, false, true).unwrap();
    let v = random_input(13, 1, 1, 1024);
    let h = 1e-2f32;
    let at = |s: f32| {
        let mut z = x.clone();
        z.data_mut().iter_mut().zip(v.data()).for_each(|(a, b)| *a += s * b);
        objective(&d.apply(&z).unwrap())
    };
    let numeric = (at(h) - at(-h)) / (2.0 * h as f64);
    let analytic = dot(&dx, &v);
    assert!((numeric - analytic).abs() < 2e-2 * analytic.abs().max(1e-2), "{numeric} vs {analytic}");
}

#[test]
fn parameter_counts_are_analytic_and_frozen() {
    let specs = [
        ("generator.default", GeneratorSpec::default().count_parameters()),
        ("generator.single_input", GeneratorSpec::single_input().count_parameters()),
        ("generator.base8", GeneratorSpec::conditional(1).with_base_channels(8).count_parameters()),
        ("discriminator.default", DiscriminatorSpec::default().count_parameters()),
        ("discriminator.small_4_64", DiscriminatorSpec::small(4, 64).count_parameters()),
    ];
    let golden = include_str!("golden/parameter_counts.txt");
    for (name, count) in specs {
        let line = golden
            .lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .unwrap_or_else(|| panic!("{name} missing from golden file"));
        let frozen: usize = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_eq!(count, frozen, "{name}");
    }

    for spec in [GeneratorSpec::conditional(1).with_base_channels(8), GeneratorSpec::single_input().with_base_channels(4)] {
        assert_eq!(Generator::new(spec.clone(), 0).unwrap().count_parameters(), spec.count_parameters());
    }
    let d = DiscriminatorSpec::small(4, 64);
    assert_eq!(MultiScaleDiscriminator::new(d.clone(), 0).unwrap().count_parameters(), d.count_parameters());

    let base = GeneratorSpec::default();
    assert_eq!(base.count_parameters(), base.clone().count_parameters());
    assert!(base.clone().with_base_channels(64).count_parameters() > base.count_parameters());
}

#[test]
fn accel_synth_spec_differs_only_in_channels() {
    let a = GeneratorSpec::single_input();
    let b = GeneratorSpec::default();
    assert_eq!((a.in_channels, a.out_channels), (1, 1));
    assert_eq!(GeneratorSpec { in_channels: b.in_channels, ..a }, b);
}
