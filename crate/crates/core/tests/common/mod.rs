#![allow(dead_code)]

use attn_topo::classifier::{Mode, Network, NetworkConfig, OptimizerKind};
use attn_topo::filtration::FiltrationKind;
use attn_topo::image::ImageStack;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-3;
/// Gradients smaller than this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Central differences on up to `coords` input coordinates, skipping those
/// whose ±step moves the input across a ReLU or pooling boundary.
pub fn check_input_gradient(net: &mut Network, x: &[f64], coords: usize, seed: u64) -> GradientCheck {
    let analytic = net.input_gradient_raw(x).unwrap();
    let base = net.activation_pattern(x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, x.len(), coords.min(x.len()));
    let mut probe = x.to_vec();
    let mut result = GradientCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for k in picks {
        probe[k] = x[k] + FD_STEP;
        let plus = net.forward_raw(&probe, Mode::Eval).unwrap();
        let plus_ok = net.activation_pattern(&probe).unwrap() == base;
        probe[k] = x[k] - FD_STEP;
        let minus = net.forward_raw(&probe, Mode::Eval).unwrap();
        let minus_ok = net.activation_pattern(&probe).unwrap() == base;
        probe[k] = x[k];
        if !(plus_ok && minus_ok) {
            result.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let scale = numeric.abs().max(analytic[k].abs()).max(FD_FLOOR);
        result.max_rel_error = result.max_rel_error.max((numeric - analytic[k]).abs() / scale);
        result.checked += 1;
    }
    result
}

/// Ten small random architectures plus the CoLA-Ordinary network on 8
/// input channels instead of 288.
pub fn gradient_configs() -> Vec<NetworkConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut configs: Vec<NetworkConfig> = (0..10)
        .map(|i| {
            let convs = rng.gen_range(0..=3);
            let h = rng.gen_range(3..=9);
            let w = rng.gen_range(3..=9);
            let pooled = convs > 0 && rng.gen_bool(0.6);
            NetworkConfig {
                optimizer: OptimizerKind::Adam,
                lr: 1e-3,
                filters: (0..convs).map(|_| rng.gen_range(1..=4)).collect(),
                pool_kernel: pooled.then(|| (0..convs).map(|_| rng.gen_range(0..=2)).collect()),
                pool_stride: None,
                pool_pad: pooled.then(|| vec![0; convs]),
                linear: (0..rng.gen_range(0..=2)).map(|_| rng.gen_range(2..=8)).collect(),
                dropout: 0.2,
                input_shape: [rng.gen_range(1..=4), h, w],
                seed: 100 + i,
            }
        })
        .collect();
    let mut cola = NetworkConfig::preset("cola", FiltrationKind::Ordinary).unwrap();
    cola.input_shape[0] = 8;
    configs.push(cola);
    configs
}

pub fn random_input(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Stacks of `channels` 6×6 images; the label decides which half of the
/// channels is bright.
pub fn separable_stacks(count: usize, channels: usize, seed: u64) -> Vec<ImageStack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = (i % 2) as u8;
            let data = (0..channels * 36)
                .map(|k| {
                    let bright = (k / 36 < channels / 2) == (label == 1);
                    rng.gen_range(0.0..0.5) + if bright { 0.5 } else { 0.0 }
                })
                .collect();
            ImageStack::new(format!("s{i}"), label, FiltrationKind::Ordinary, 1, (0..channels).collect(), 6, 6, data)
                .unwrap()
        })
        .collect()
}

pub fn small_config(channels: usize, seed: u64) -> NetworkConfig {
    NetworkConfig {
        optimizer: OptimizerKind::Adam,
        lr: 1e-2,
        filters: vec![4],
        pool_kernel: Some(vec![2]),
        pool_stride: None,
        pool_pad: None,
        linear: vec![8],
        dropout: 0.1,
        input_shape: [channels, 6, 6],
        seed,
    }
}
