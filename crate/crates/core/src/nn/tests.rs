use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::codec::{decode, encode};
use super::*;

/// Layer-by-layer evaluation with plain loops, independent of the gemm path.
fn naive_forward(net: &Mlp, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for l in 0..net.n_layers() {
        let (n_in, n_out) = (net.layer_sizes()[l], net.layer_sizes()[l + 1]);
        let (w, b) = net.layer_offsets(l);
        let p = net.params();
        let mut y = vec![0.0; n_out];
        for j in 0..n_out {
            let mut z = p[b + j];
            for i in 0..n_in {
                z += p[w + j * n_in + i] * x[i];
            }
            y[j] = if l + 1 == net.n_layers() {
                match net.output_activation() {
                    Activation::Tanh => libm::tanh(z),
                    _ => z,
                }
            } else {
                z.max(0.0)
            };
        }
        x = y;
    }
    x
}

fn random_net(sizes: &[usize], out: Activation, seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::zeros(sizes, out).unwrap();
    let normal = Normal::new(0.0, 0.1).unwrap();
    for p in net.params_mut() {
        *p = normal.sample(&mut rng);
    }
    net
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| normal.sample(&mut rng)).collect()
}

#[test]
fn zero_network_outputs_zero() {
    let net = Mlp::zeros(&[4, 8, 3], Activation::Identity).unwrap();
    assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 3]);
}

#[test]
fn identity_layer_is_identity() {
    let mut net = Mlp::zeros(&[3, 3], Activation::Identity).unwrap();
    for i in 0..3 {
        net.params_mut()[i * 3 + i] = 1.0;
    }
    let x = [0.25, -7.0, 3.5];
    assert_eq!(net.forward(&x).unwrap(), x.to_vec());
}

#[test]
fn forward_matches_naive_evaluation() {
    let net = random_net(&[5, 64, 64, 1], Activation::Identity, 7);
    for k in 0..10 {
        let x = random_vec(5, 100 + k);
        let fast = net.forward(&x).unwrap();
        let slow = naive_forward(&net, &x);
        assert!((fast[0] - slow[0]).abs() < 1e-12 * slow[0].abs().max(1.0));
    }
}

#[test]
fn batch_forward_matches_single() {
    let net = random_net(&[4, 16, 16, 2], Activation::Tanh, 3);
    let xs = random_vec(4 * 9, 11);
    let cache = net.forward_batch(&xs, 9).unwrap();
    for (row, x) in cache.output().chunks(2).zip(xs.chunks(4)) {
        let single = naive_forward(&net, x);
        assert!((row[0] - single[0]).abs() < 1e-12 && (row[1] - single[1]).abs() < 1e-12);
    }
}

#[test]
fn shape_errors() {
    let net = Mlp::zeros(&[4, 2, 1], Activation::Identity).unwrap();
    assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Shape { .. })));
    let cache = net.forward_batch(&[0.0; 8], 2).unwrap();
    assert!(matches!(
        net.backward(&cache, &[1.0]),
        Err(Error::Shape { .. })
    ));
    assert!(Mlp::zeros(&[4], Activation::Identity).is_err());
    assert!(Mlp::zeros(&[4, 0, 1], Activation::Identity).is_err());
}

#[test]
fn zero_output_gradient_gives_zero() {
    let net = random_net(&[5, 8, 1], Activation::Tanh, 1);
    let cache = net.forward_batch(&random_vec(5, 2), 1).unwrap();
    assert!(net
        .backward(&cache, &[0.0])
        .unwrap()
        .iter()
        .all(|&g| g == 0.0));
}

#[test]
fn tanh_output_gradient_at_zero_preactivation() {
    // single layer with zero params: pre-activation 0, so dy/db = tanh'(0) = 1
    let net = Mlp::zeros(&[2, 1], Activation::Tanh).unwrap();
    let cache = net.forward_batch(&[0.3, -0.4], 1).unwrap();
    let g = net.backward(&cache, &[2.5]).unwrap();
    assert_eq!(g[2], 2.5);
    assert!((g[0] - 2.5 * 0.3).abs() < 1e-15);
}

/// Central finite differences of `output · probe` for a sample of parameters.
fn check_gradients(sizes: &[usize], out: Activation, seed: u64) {
    let mut net = random_net(sizes, out, seed);
    let x = random_vec(sizes[0], seed + 1);
    let probe = random_vec(net.output_dim(), seed + 2);
    let cache = net.forward_batch(&x, 1).unwrap();
    let analytic = net.backward(&cache, &probe).unwrap();
    let objective = |n: &Mlp| -> f64 {
        naive_forward(n, &x)
            .iter()
            .zip(&probe)
            .map(|(a, b)| a * b)
            .sum()
    };
    let h = 1e-5;
    let n = net.n_params();
    let stride = (n / 100).max(1);
    let mut checked = 0;
    for i in (0..n).step_by(stride).take(100) {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let plus = objective(&net);
        net.params_mut()[i] = orig - h;
        let minus = objective(&net);
        net.params_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs()).max(1e-8);
        assert!(
            (analytic[i] - fd).abs() / scale <= 1e-4,
            "param {i}: analytic {} fd {fd}",
            analytic[i]
        );
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn gradient_check_predictor_architecture() {
    check_gradients(&[4, 100, 100, 100, 1], Activation::Identity, 21);
}

#[test]
fn gradient_check_actor_architecture() {
    check_gradients(&[5, 64, 64, 1], Activation::Tanh, 22);
}

#[test]
fn gradient_check_critic_architecture() {
    check_gradients(&[5, 64, 64, 1], Activation::Identity, 23);
}

#[test]
fn batch_gradient_is_sum_of_sample_gradients() {
    let net = random_net(&[3, 6, 1], Activation::Identity, 5);
    let xs = random_vec(6, 6);
    let both = net
        .backward(&net.forward_batch(&xs, 2).unwrap(), &[1.0, 1.0])
        .unwrap();
    let a = net
        .backward(&net.forward_batch(&xs[..3], 1).unwrap(), &[1.0])
        .unwrap();
    let b = net
        .backward(&net.forward_batch(&xs[3..], 1).unwrap(), &[1.0])
        .unwrap();
    for i in 0..both.len() {
        assert!((both[i] - a[i] - b[i]).abs() < 1e-12);
    }
}

#[test]
fn initialization_is_seeded() {
    let a = Mlp::new(
        &[4, 100, 1],
        Activation::Identity,
        &mut ChaCha8Rng::seed_from_u64(9),
    )
    .unwrap();
    let b = Mlp::new(
        &[4, 100, 1],
        Activation::Identity,
        &mut ChaCha8Rng::seed_from_u64(9),
    )
    .unwrap();
    let c = Mlp::new(
        &[4, 100, 1],
        Activation::Identity,
        &mut ChaCha8Rng::seed_from_u64(10),
    )
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // biases start at zero
    let (_, bias) = a.layer_offsets(0);
    assert!(a.params()[bias..bias + 100].iter().all(|&p| p == 0.0));
}

#[test]
fn adam_descends_quadratic() {
    // fit y = 2x + 1 with a single linear unit
    let mut net = Mlp::zeros(&[1, 1], Activation::Identity).unwrap();
    let mut opt = AdamState::new(net.n_params(), 0.05);
    let xs: Vec<f64> = (0..16).map(|i| i as f64 / 8.0 - 1.0).collect();
    for _ in 0..2000 {
        let cache = net.forward_batch(&xs, xs.len()).unwrap();
        let grad_out: Vec<f64> = cache
            .output()
            .iter()
            .zip(&xs)
            .map(|(y, x)| 2.0 * (y - (2.0 * x + 1.0)) / xs.len() as f64)
            .collect();
        let g = net.backward(&cache, &grad_out).unwrap();
        net.adam_step(&g, &mut opt).unwrap();
    }
    assert!((net.params()[0] - 2.0).abs() < 1e-3 && (net.params()[1] - 1.0).abs() < 1e-3);
    assert_eq!(opt.step_count, 2000);
}

#[test]
fn codec_round_trip_is_bit_exact() {
    let net = random_net(&[5, 64, 64, 1], Activation::Tanh, 31);
    let mut opt = AdamState::new(net.n_params(), 1e-4);
    opt.step_count = 17;
    opt.first_moment[3] = 0.125;
    let bytes = encode(&net, Some(&opt));
    let (back, back_opt) = decode(&bytes).unwrap();
    assert_eq!(back, net);
    assert_eq!(back_opt.unwrap(), opt);
    let x = random_vec(5, 4);
    assert_eq!(
        back.forward(&x).unwrap()[0].to_bits(),
        net.forward(&x).unwrap()[0].to_bits()
    );
    let (_, none) = decode(&encode(&net, None)).unwrap();
    assert!(none.is_none());
}

#[test]
fn codec_rejects_corruption() {
    let net = random_net(&[2, 3, 1], Activation::Identity, 1);
    let bytes = encode(&net, None);
    let mut bad_version = bytes.clone();
    bad_version[8] = 9;
    assert!(matches!(decode(&bad_version), Err(Error::Format(_))));
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(decode(&bad_magic).is_err());
    assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(decode(&trailing).is_err());
    let mut bad_sizes = bytes;
    bad_sizes[16] = 7; // claims a different input width than the parameter count supports
    assert!(decode(&bad_sizes).is_err());
}

proptest! {
    #[test]
    fn output_ranges(seed in 0u64..1000, scale in 0.1f64..5.0) {
        let tanh_net = random_net(&[3, 8, 2], Activation::Tanh, seed);
        let x: Vec<f64> = random_vec(3, seed + 1).iter().map(|v| v * scale).collect();
        for y in tanh_net.forward(&x).unwrap() {
            prop_assert!(y > -1.0 && y < 1.0);
        }
        let cache = tanh_net.forward_batch(&x, 1).unwrap();
        prop_assert!(cache.activations[1].iter().all(|&h| h >= 0.0));
    }
}
