//! Finite-difference checks for every layer's backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rand_tensor(n: usize, c: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(
        n,
        c,
        h,
        w,
        (0..n * c * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
}

/// L = Σ probe·y, evaluated in f64.
fn probe_loss(y: &Tensor, probe: &[f32]) -> f64 {
    y.data
        .iter()
        .zip(probe)
        .map(|(a, b)| *a as f64 * *b as f64)
        .sum()
}

fn assert_close(analytic: f32, numeric: f64, what: &str) {
    let err = (analytic as f64 - numeric).abs();
    let scale = numeric.abs().max(analytic.abs() as f64).max(1e-2);
    assert!(
        err / scale < 2e-2,
        "{what}: analytic {analytic} vs numeric {numeric}"
    );
}

/// Checks input gradient and a sample of parameter gradients of `layer`.
fn check_layer<L: Clone>(
    mut layer: L,
    x: Tensor,
    fwd: impl Fn(&L, &Tensor) -> Tensor,
    fwd_train: impl Fn(&mut L, &Tensor) -> Tensor,
    bwd: impl Fn(&mut L, &Tensor) -> Tensor,
    params: impl Fn(&mut L) -> Vec<&mut Param>,
    rng: &mut ChaCha8Rng,
) {
    let y = fwd_train(&mut layer, &x);
    let probe: Vec<f32> = (0..y.data.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let dy = Tensor::from_vec(y.n, y.c, y.h, y.w, probe.clone());
    let dx = bwd(&mut layer, &dy);
    let h = 1e-2f32;

    for t in (0..x.data.len()).step_by((x.data.len() / 7).max(1)) {
        let mut xp = x.clone();
        xp.data[t] += h;
        let mut xm = x.clone();
        xm.data[t] -= h;
        let num = (probe_loss(&fwd(&layer, &xp), &probe) - probe_loss(&fwd(&layer, &xm), &probe))
            / (2.0 * h as f64);
        assert_close(dx.data[t], num, "input grad");
    }

    let grads: Vec<Vec<f32>> = params(&mut layer).iter().map(|p| p.grad.clone()).collect();
    for (k, g) in grads.iter().enumerate() {
        for t in (0..g.len()).step_by((g.len() / 5).max(1)) {
            let mut lp = layer.clone();
            params(&mut lp)[k].value[t] += h;
            let mut lm = layer.clone();
            params(&mut lm)[k].value[t] -= h;
            let num = (probe_loss(&fwd(&lp, &x), &probe) - probe_loss(&fwd(&lm, &x), &probe))
                / (2.0 * h as f64);
            assert_close(g[t], num, "param grad");
        }
    }
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(k, s, p) in &[(4, 2, 1), (3, 1, 1)] {
        let conv = Conv2d::new(3, 4, k, s, p, &mut rng);
        let x = rand_tensor(2, 3, 8, 8, &mut rng);
        check_layer(
            conv,
            x,
            |l, x| l.forward(x),
            |l, x| l.forward_train(x),
            |l, d| l.backward(d),
            |l| l.params_mut(),
            &mut rng,
        );
    }
}

#[test]
fn conv_transpose2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let conv = ConvTranspose2d::new(3, 2, 4, 2, 1, &mut rng);
    let x = rand_tensor(2, 3, 4, 4, &mut rng);
    check_layer(
        conv,
        x,
        |l, x| l.forward(x),
        |l, x| l.forward_train(x),
        |l, d| l.backward(d),
        |l| l.params_mut(),
        &mut rng,
    );
}

#[test]
fn conv_transpose_is_adjoint_of_conv() {
    // <conv(x), y> == <x, convT(y)> when both share weights and have zero bias.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let conv = Conv2d::new(2, 3, 4, 2, 1, &mut rng);
    let mut convt = ConvTranspose2d::new(3, 2, 4, 2, 1, &mut rng);
    // conv weight [out=3, in=2*k*k] and convT weight [in=3, out=2*k*k] share layout.
    convt.weight.value = conv.weight.value.clone();
    let x = rand_tensor(1, 2, 8, 8, &mut rng);
    let y = rand_tensor(1, 3, 4, 4, &mut rng);
    let lhs: f64 = conv
        .forward(&x)
        .data
        .iter()
        .zip(&y.data)
        .map(|(a, b)| (*a as f64) * (*b as f64))
        .sum();
    let rhs: f64 = x
        .data
        .iter()
        .zip(&convt.forward(&y).data)
        .map(|(a, b)| (*a as f64) * (*b as f64))
        .sum();
    assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
    assert_eq!(convt.forward(&y).shape(), [1, 2, 8, 8]);
}

#[test]
fn batchnorm_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bn = BatchNorm2d::new(3);
    bn.gamma.value = vec![0.5, 1.5, -1.0];
    bn.beta.value = vec![0.1, -0.2, 0.3];
    let x = rand_tensor(3, 3, 4, 4, &mut rng);
    // Compare against training-mode forward without touching running stats.
    let fwd = |l: &BatchNorm2d, x: &Tensor| {
        let mut c = l.clone();
        c.forward_train(x)
    };
    check_layer(
        bn,
        x,
        fwd,
        |l, x| l.forward_train(x),
        |l, d| l.backward(d),
        |l| l.params_mut(),
        &mut rng,
    );
}

#[test]
fn batchnorm_running_stats_converge_to_batch_stats() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bn = BatchNorm2d::new(1);
    let x = rand_tensor(4, 1, 4, 4, &mut rng).map(|v| 3.0 * v + 2.0);
    for _ in 0..200 {
        bn.forward_train(&x);
    }
    let eval = bn.forward(&x);
    let train = bn.clone().forward_train(&x);
    for (a, b) in eval.data.iter().zip(&train.data) {
        assert!((a - b).abs() < 0.05);
    }
}

#[test]
fn activation_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for kind in [
        Activation::Relu,
        Activation::LeakyRelu(0.2),
        Activation::Tanh,
        Activation::Sigmoid,
    ] {
        let x = rand_tensor(1, 2, 3, 3, &mut rng);
        check_layer(
            Act::new(kind),
            x,
            |l, x| l.forward(x),
            |l, x| l.forward_train(x),
            |l, d| l.backward(d),
            |_| vec![],
            &mut rng,
        );
    }
}

#[test]
fn linear_and_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lin = Linear::new(12, 5, &mut rng);
    let x = rand_tensor(2, 3, 2, 2, &mut rng);
    check_layer(
        lin,
        x,
        |l, x| l.forward(x),
        |l, x| l.forward_train(x),
        |l, d| l.backward(d),
        |l| l.params_mut(),
        &mut rng,
    );

    let x = rand_tensor(2, 2, 4, 4, &mut rng);
    check_layer(
        MaxPool2::new(),
        x,
        |l, x| l.forward(x),
        |l, x| l.forward_train(x),
        |l, d| l.backward(d),
        |_| vec![],
        &mut rng,
    );
}

#[test]
fn dropout_scales_kept_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut d = Dropout::new(0.5);
    let x = Tensor::from_vec(1, 1, 100, 100, vec![1.0; 10_000]);
    let y = d.forward_train(&x, &mut rng);
    assert!(y.data.iter().all(|&v| v == 0.0 || v == 2.0));
    let kept = y.data.iter().filter(|&&v| v > 0.0).count();
    assert!((4_500..5_500).contains(&kept));
    let dx = d.backward(&x);
    assert_eq!(dx.data, y.data);
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut p = Param::filled(3, 5.0);
    let mut opt = Adam::new(0.1);
    for _ in 0..500 {
        for t in 0..3 {
            p.grad[t] = 2.0 * (p.value[t] - t as f32);
        }
        opt.step(vec![&mut p]);
    }
    for t in 0..3 {
        assert!((p.value[t] - t as f32).abs() < 1e-2);
    }
}

#[test]
fn module_state_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = Conv2d::new(2, 3, 3, 1, 1, &mut rng);
    let mut b = Conv2d::new(2, 3, 3, 1, 1, &mut rng);
    assert_ne!(a.weight.value, b.weight.value);
    b.copy_from(&a);
    assert_eq!(a.weight.value, b.weight.value);
    assert!(b.import_state(&[0.0; 3]).is_err());
}
