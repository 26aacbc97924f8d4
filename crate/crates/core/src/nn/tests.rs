//! Directional finite-difference checks of every hand-written backward pass.

use alloc::vec::Vec;

use super::*;
use crate::rng::{seeded, symmetric_f32, Rng};

fn random_tensor(rng: &mut Rng, b: usize, c: usize, t: usize) -> Tensor {
    let data = (0..b * c * t).map(|_| symmetric_f32(rng, 1.0)).collect();
    Tensor::from_vec(b, c, t, data).unwrap()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Compares `<grad, v>` with the central difference of `f` along `v`.
fn check_directional(f: &dyn Fn(&[f32]) -> f64, x: &[f32], grad: &[f32], rng: &mut Rng, h: f32, tol: f64) {
    let v: Vec<f32> = (0..x.len()).map(|_| symmetric_f32(rng, 1.0)).collect();
    let plus: Vec<f32> = x.iter().zip(&v).map(|(a, d)| a + h * d).collect();
    let minus: Vec<f32> = x.iter().zip(&v).map(|(a, d)| a - h * d).collect();
    let numeric = (f(&plus) - f(&minus)) / (2.0 * h as f64);
    let analytic = dot(grad, &v);
    let scale = numeric.abs().max(analytic.abs()).max(1e-3);
    assert!(
        (numeric - analytic).abs() / scale < tol,
        "numeric {numeric} vs analytic {analytic}"
    );
}

fn conv_case(opts: ConvOptions, cin: usize, cout: usize, len: usize) {
    let mut rng = seeded(7);
    let mut store = ParamStore::new();
    let conv = Conv1d::new(&mut store, &mut rng, "c", cin, cout, opts);
    let x = random_tensor(&mut rng, 2, cin, len);
    let (y, cache) = conv.forward(&store, &x).unwrap();
    assert_eq!(y.len(), len.div_ceil(opts.stride));
    let r = random_tensor(&mut rng, 2, cout, y.len());
    let dx = conv.backward(&mut store, &cache, &r, true, true).unwrap();

    let objective = |s: &ParamStore, xin: &Tensor| dot(conv.apply(s, xin).unwrap().data(), r.data());
    check_directional(
        &|xv| objective(&store, &Tensor::from_vec(2, cin, len, xv.to_vec()).unwrap()),
        x.data(),
        dx.data(),
        &mut rng,
        1e-2,
        1e-3,
    );
    let ids: Vec<ParamId> = [Some(conv.weight_id()), conv.gain_id(), Some(conv.bias_id())]
        .into_iter()
        .flatten()
        .collect();
    for id in ids {
        let base = store.get(id).value.clone();
        let grad = store.get(id).grad.clone();
        let f = |pv: &[f32]| {
            let mut s = store.clone();
            s.get_mut(id).value.copy_from_slice(pv);
            objective(&s, &x)
        };
        check_directional(&f, &base, &grad, &mut rng, 1e-3, 2e-2);
    }
}

#[test]
fn conv_same_padding_gradients() {
    conv_case(ConvOptions::new(3), 3, 4, 17);
    conv_case(ConvOptions::new(3).dilation(9), 2, 2, 40);
    conv_case(ConvOptions::new(1), 3, 5, 8);
    conv_case(ConvOptions::new(7).weight_norm(true), 2, 3, 16);
}

#[test]
fn strided_and_grouped_conv_gradients() {
    conv_case(ConvOptions::new(4).stride(2).weight_norm(true), 2, 4, 16);
    conv_case(ConvOptions::new(16).stride(8), 2, 4, 64);
    conv_case(ConvOptions::new(41).stride(4).groups(4), 8, 16, 64);
}

#[test]
fn transposed_conv_gradients() {
    for (stride, wn) in [(2, false), (8, true)] {
        let mut rng = seeded(11);
        let mut store = ParamStore::new();
        let layer = ConvTranspose1d::new(&mut store, &mut rng, "t", 4, 3, 2 * stride, stride, wn);
        let x = random_tensor(&mut rng, 2, 4, 6);
        let (y, cache) = layer.forward(&store, &x).unwrap();
        assert_eq!(y.len(), 6 * stride);
        let r = random_tensor(&mut rng, 2, 3, y.len());
        let dx = layer.backward(&mut store, &cache, &r, true, true).unwrap();
        let objective = |s: &ParamStore, xin: &Tensor| dot(layer.apply(s, xin).unwrap().data(), r.data());
        check_directional(
            &|xv| objective(&store, &Tensor::from_vec(2, 4, 6, xv.to_vec()).unwrap()),
            x.data(),
            dx.data(),
            &mut rng,
            1e-2,
            1e-3,
        );
        let ids: Vec<ParamId> = [Some(layer.weight_id()), layer.gain_id(), Some(layer.bias_id())]
            .into_iter()
            .flatten()
            .collect();
        for id in ids {
            let base = store.get(id).value.clone();
            let grad = store.get(id).grad.clone();
            let f = |pv: &[f32]| {
                let mut s = store.clone();
                s.get_mut(id).value.copy_from_slice(pv);
                objective(&s, &x)
            };
            check_directional(&f, &base, &grad, &mut rng, 1e-3, 2e-2);
        }
    }
}

#[test]
fn transposed_conv_is_adjoint_of_strided_conv() {
    // <conv(x), y> == <x, conv_t(y)> for shared weights and no bias
    let mut rng = seeded(3);
    let mut store = ParamStore::new();
    let conv = Conv1d::new(&mut store, &mut rng, "c", 2, 3, ConvOptions::new(8).stride(4));
    let convt = ConvTranspose1d::new(&mut store, &mut rng, "t", 3, 2, 8, 4, false);
    let w = store.value(conv.weight_id()).to_vec();
    // conv weight (out=3, in=2, k) and transposed weight (in=3, out=2, k) share layout
    store.get_mut(convt.weight_id()).value.copy_from_slice(&w);
    store.get_mut(conv.bias_id()).value.fill(0.0);
    store.get_mut(convt.bias_id()).value.fill(0.0);
    let x = random_tensor(&mut rng, 1, 2, 32);
    let y = random_tensor(&mut rng, 1, 3, 8);
    let lhs = dot(conv.apply(&store, &x).unwrap().data(), y.data());
    let rhs = dot(x.data(), convt.apply(&store, &y).unwrap().data());
    assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
}

#[test]
fn layer_norm_gradients() {
    let mut rng = seeded(5);
    let mut store = ParamStore::new();
    let norm = ChannelLayerNorm::new(&mut store, "n", 4);
    for p in store.iter_mut() {
        p.value.iter_mut().for_each(|v| *v += 0.3);
    }
    let x = random_tensor(&mut rng, 2, 4, 9);
    let (y, cache) = norm.forward(&store, &x);
    let r = random_tensor(&mut rng, 2, 4, 9);
    let dx = norm.backward(&mut store, &cache, &r, true);
    // each time step is normalized across channels
    let mean: f32 = (0..4).map(|c| (y.row(0, c)[3] - 0.3) / 1.3).sum::<f32>() / 4.0;
    assert!(mean.abs() < 1e-5);
    let objective = |s: &ParamStore, xin: &Tensor| dot(norm.forward(s, xin).0.data(), r.data());
    check_directional(
        &|xv| objective(&store, &Tensor::from_vec(2, 4, 9, xv.to_vec()).unwrap()),
        x.data(),
        dx.data(),
        &mut rng,
        1e-3,
        1e-2,
    );
    for p in 0..store.len() {
        let id = store.find(if p == 0 { "n.gamma" } else { "n.beta" }).unwrap();
        let base = store.get(id).value.clone();
        let grad = store.get(id).grad.clone();
        let f = |pv: &[f32]| {
            let mut s = store.clone();
            s.get_mut(id).value.copy_from_slice(pv);
            objective(&s, &x)
        };
        check_directional(&f, &base, &grad, &mut rng, 1e-2, 1e-3);
    }
}

#[test]
fn pooling_and_activation_gradients() {
    let mut rng = seeded(9);
    let x = random_tensor(&mut rng, 1, 2, 10);
    let y = avg_pool(&x);
    assert_eq!(y.len(), 5);
    assert!((y.row(0, 0)[0] - (x.row(0, 0)[0] + x.row(0, 0)[1] + x.row(0, 0)[2]) / 3.0).abs() < 1e-6);
    let r = random_tensor(&mut rng, 1, 2, 5);
    let dx = avg_pool_backward(&r, 10);
    check_directional(
        &|xv| dot(avg_pool(&Tensor::from_vec(1, 2, 10, xv.to_vec()).unwrap()).data(), r.data()),
        x.data(),
        dx.data(),
        &mut rng,
        1e-2,
        1e-4,
    );

    type Act = (fn(&Tensor) -> Tensor, fn(&Tensor, &Tensor) -> Tensor);
    let acts: [Act; 3] = [
        (elu, elu_backward),
        (tanh, tanh_backward),
        (|t| leaky_relu(t, 0.3), |y, d| leaky_relu_backward(y, d, 0.3)),
    ];
    let r = random_tensor(&mut rng, 1, 2, 10);
    for (f, df) in acts {
        let y = f(&x);
        let dx = df(&y, &r);
        check_directional(
            &|xv| dot(f(&Tensor::from_vec(1, 2, 10, xv.to_vec()).unwrap()).data(), r.data()),
            x.data(),
            dx.data(),
            &mut rng,
            1e-3,
            1e-2,
        );
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut store = ParamStore::new();
    let id = store.add_constant("p".into(), alloc::vec![3], 1.0);
    store.grad_mut(id).copy_from_slice(&[0.5, -2.0, 0.0]);
    let mut opt = Adam::new(AdamConfig::default(), &store);
    opt.step(&mut store);
    let v = store.value(id);
    // bias-corrected first step is lr * sign(g)
    assert!((v[0] - (1.0 - 1e-4)).abs() < 1e-7);
    assert!((v[1] - (1.0 + 1e-4)).abs() < 1e-7);
    assert_eq!(v[2], 1.0);
    assert_eq!(opt.state.step, 1);
}
