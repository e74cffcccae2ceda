mod common;

use attn_topo::classifier::{accuracy_on, train, Network, OptimizerKind, TrainOptions};
use common::*;

#[test]
fn input_gradients_match_central_differences() {
    for (i, config) in gradient_configs().iter().enumerate() {
        let mut net = Network::build(config).unwrap();
        let x = random_input(net.input_len(), i as u64);
        let check = check_input_gradient(&mut net, &x, 200, i as u64);
        assert!(check.checked > 0, "config {i} checked nothing");
        assert!(check.max_rel_error < 1e-4, "config {i}: {}", check.max_rel_error);
    }
}

#[test]
fn separable_data_is_learned() {
    let train_set = separable_stacks(80, 4, 1);
    let held_out = separable_stacks(40, 4, 2);
    let mut net = Network::build(&small_config(4, 3)).unwrap();
    let report = train(&mut net, &train_set, &held_out, TrainOptions { epochs: 15, batch_size: 8 }).unwrap();
    assert!(report.final_accuracy().unwrap() >= 0.95, "{:?}", report.losses());
    assert!(accuracy_on(&mut net, &held_out).unwrap() >= 0.95);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = separable_stacks(10, 2, 4);
    for optimizer in [OptimizerKind::Adam, OptimizerKind::Rmsprop] {
        let mut config = small_config(2, 5);
        config.lr = 0.0;
        config.optimizer = optimizer;
        let mut net = Network::build(&config).unwrap();
        let before = net.parameters().to_vec();
        train(&mut net, &data, &[], TrainOptions { epochs: 2, batch_size: 3 }).unwrap();
        assert_eq!(net.parameters(), &before[..]);
    }
}

#[test]
fn single_sample_is_memorized() {
    let data = separable_stacks(1, 2, 6);
    let mut config = small_config(2, 7);
    config.dropout = 0.0;
    config.optimizer = OptimizerKind::Rmsprop;
    config.lr = 1e-3;
    let mut net = Network::build(&config).unwrap();
    let report = train(&mut net, &data, &data, TrainOptions { epochs: 200, batch_size: 1 }).unwrap();
    let losses = report.losses();
    assert!(losses.last().unwrap() < &0.01, "{losses:?}");
    assert_eq!(report.final_accuracy(), Some(1.0));
}

#[test]
fn training_is_reproducible() {
    let data = separable_stacks(20, 4, 8);
    let run = || {
        let mut net = Network::build(&small_config(4, 9)).unwrap();
        let report = train(&mut net, &data, &data, TrainOptions { epochs: 3, batch_size: 4 }).unwrap();
        (net.parameters().to_vec(), report.losses())
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_predicts_identically() {
    let data = separable_stacks(12, 4, 10);
    let mut net = Network::build(&small_config(4, 11)).unwrap();
    train(&mut net, &data, &[], TrainOptions { epochs: 2, batch_size: 4 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    net.save(dir.path()).unwrap();
    let mut back = Network::load(dir.path()).unwrap();
    for s in &data {
        assert_eq!(net.predict(s).unwrap(), back.predict(s).unwrap());
    }
    let mut wrong = small_config(4, 11);
    wrong.input_shape = [3, 6, 6];
    let mut other = Network::build(&wrong).unwrap();
    assert!(other.predict(&data[0]).is_err());
}
