use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::network::{InitScheme, Layer};
use crate::neuron::{grad_neuron, CausalSet, NeuronModelConfig, NeuronValue};

fn no_reg() -> LossConfig {
    LossConfig {
        lambda: 0.0,
        k: 0.0,
        beta: 1.0,
        denominator: Denominator::ExcludeTrue,
    }
}

fn net_from(layers: Vec<Array2<f64>>) -> Network {
    Network::new(
        NeuronModelConfig::training_default(),
        layers.into_iter().map(|w| Layer::new(w).unwrap()).collect(),
    )
    .unwrap()
}

#[test]
fn loss_examples() {
    assert!(data_loss(&[1.0, 2.0, 2.0], 0, Denominator::ExcludeTrue).unwrap().abs() < 1e-15);
    let l = data_loss(&[2.0, 1.0], 0, Denominator::ExcludeTrue).unwrap();
    assert!((l - 2f64.ln()).abs() < 1e-15);
    assert!(data_loss(&[1.0], 0, Denominator::ExcludeTrue).is_err());
    assert!(data_loss(&[1.0, 2.0], 2, Denominator::ExcludeTrue).is_err());
    let soft = data_loss(&[1.0, 1.0], 0, Denominator::AllClasses).unwrap();
    assert!((soft - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn weight_sum_penalty() {
    let net = net_from(vec![array![[0.25, 0.25], [1.0, 1.0]]]);
    let lcfg = LossConfig {
        lambda: 0.0,
        k: 100.0,
        beta: 1.0,
        denominator: Denominator::ExcludeTrue,
    };
    assert!((regularizer(&net, &lcfg) - 50.0).abs() < 1e-12);
    let exact = net_from(vec![array![[0.5, 0.5]]]);
    assert_eq!(regularizer(&exact, &lcfg), 0.0);
}

#[test]
fn sentinel_replaces_no_spike() {
    let a = data_loss(&[1.0, f64::INFINITY], 0, Denominator::ExcludeTrue).unwrap();
    let b = data_loss(&[1.0, NO_SPIKE_SENTINEL], 0, Denominator::ExcludeTrue).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_neuron_chain_rule() {
    // Two outputs so the loss is defined; only output 0 is examined.
    let net = net_from(vec![array![[1.5, 0.7], [0.9, 1.2]]]);
    let x = array![[1.2, 2.0]];
    let (loss, grads, _) = loss_and_gradient(&net, &x, &[0], &no_reg()).unwrap();
    let (out, rec) = net.forward(&x).unwrap();
    let z_out = out.row(0).to_vec();
    let s = 1.0 / z_out[1];
    assert!((loss - (z_out[0].ln() + s.ln())).abs() < 1e-12);
    let dl_dz0 = 1.0 / z_out[0];
    let z: Vec<NeuronValue> = x.row(0).iter().map(|&v| NeuronValue::new(v).unwrap()).collect();
    let causal: CausalSet = rec.causal_set(0, 0, 0);
    let (_, dw) = grad_neuron(&z, &[1.5, 0.7], &causal, NeuronValue::new(z_out[0]).unwrap(), net.cfg()).unwrap();
    for i in 0..2 {
        assert!((grads.layers[0][(0, i)] - dl_dz0 * dw[i]).abs() < 1e-12);
    }
}

fn random_case(seed: u64) -> (Network, Array2<f64>, Vec<usize>) {
    let net = Network::init(
        NeuronModelConfig::training_default(),
        &[5, 4, 3],
        seed,
        InitScheme::positive_mean(1.0),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let d = Array2::from_shape_fn((6, 5), |_| rng.gen::<f64>());
    let x = net.encode_batch(&d).unwrap();
    let y = (0..6).map(|_| rng.gen_range(0..3)).collect();
    (net, x, y)
}

#[test]
fn gradient_matches_finite_differences() {
    let lcfg = LossConfig::default();
    for seed in 0..5 {
        let (net, x, y) = random_case(seed);
        let (_, grads, _) = loss_and_gradient(&net, &x, &y, &lcfg).unwrap();
        let (_, base) = net.forward(&x).unwrap();
        for l in 0..net.depth() {
            let (rows, cols) = net.layers()[l].weights().dim();
            for j in 0..rows {
                for i in 0..cols {
                    let mut probe = net.clone();
                    probe.layer_mut(l)[(j, i)] += 1e-4;
                    let (_, moved) = probe.forward(&x).unwrap();
                    let same = base.samples().iter().zip(moved.samples()).all(|(a, b)| a.prefixes == b.prefixes);
                    if !same {
                        continue;
                    }
                    let fd = finite_difference(&net, &x, &y, &lcfg, l, j, i, 1e-6).unwrap();
                    let an = grads.layers[l][(j, i)];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-4, "seed {seed} layer {l} ({j},{i}): {an} vs {fd}");
                }
            }
        }
    }
}

#[test]
fn silent_network_only_has_penalty_gradient() {
    let net = net_from(vec![array![[0.1, 0.1], [0.2, 0.3]]]);
    let lcfg = LossConfig {
        lambda: 0.0,
        ..LossConfig::default()
    };
    let x = array![[1.0, 1.5]];
    let (out, _) = net.forward(&x).unwrap();
    assert!(out.iter().all(|v| v.is_infinite()));
    let (_, g, _) = loss_and_gradient(&net, &x, &[1], &lcfg).unwrap();
    assert!(g.layers[0].iter().all(|&v| v == -100.0));
}

#[test]
fn stale_record_rejected() {
    let (mut net, x, y) = random_case(1);
    let (_, rec) = net.forward(&x).unwrap();
    let w = net.layers()[1].weights()[(0, 0)];
    net.layer_mut(1)[(0, 0)] = w * 1.01;
    assert!(matches!(
        backward(&rec, &y, &net, &LossConfig::default()),
        Err(Error::StaleRecord { .. })
    ));
}

#[test]
fn adam_zero_gradient_keeps_weights() {
    let (mut net, _, _) = random_case(2);
    let before = net.layers().to_vec();
    let mut state = OptimizerState::new(&net);
    let zero = Gradients::zeros_like(&net);
    adam_step(&mut net, &zero, &mut state, &TrainConfig::default()).unwrap();
    assert_eq!(net.layers(), &before[..]);
    assert_eq!(state.step(), 1);
}

#[test]
fn adam_first_step_is_learning_rate() {
    let mut net = net_from(vec![array![[2.0], [2.0]]]);
    let mut state = OptimizerState::new(&net);
    let g = Gradients {
        layers: vec![array![[0.37], [-5.0]]],
    };
    let tcfg = TrainConfig::default();
    adam_step(&mut net, &g, &mut state, &tcfg).unwrap();
    let w = net.layers()[0].weights();
    assert!((2.0 - w[(0, 0)] - tcfg.learning_rate).abs() < 1e-9);
    assert!((w[(1, 0)] - 2.0 - tcfg.learning_rate).abs() < 1e-9);
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let (mut net, _, _) = random_case(3);
    let mut state = OptimizerState::new(&net);
    let mut g = Gradients::zeros_like(&net);
    g.layers[1][(0, 0)] = f64::NAN;
    let err = adam_step(&mut net, &g, &mut state, &TrainConfig::default()).unwrap_err();
    assert!(err.to_string().contains("layer 1"), "{err}");
}

#[test]
fn non_rational_variant_has_no_backward() {
    let cfg = NeuronModelConfig::default_for(crate::NeuronModel::LifExpBt1);
    let net = Network::init(cfg, &[2, 2], 0, InitScheme::positive_mean(1.0)).unwrap();
    let x = array![[0.0, 1.0]];
    assert!(matches!(
        loss_and_gradient(&net, &x, &[0], &LossConfig::default()),
        Err(Error::UnsupportedVariant(_))
    ));
}

fn xor() -> (Array2<f64>, Vec<usize>) {
    let cfg = NeuronModelConfig::training_default();
    let d = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let mut x = Array2::zeros((4, 2));
    for (i, row) in d.rows().into_iter().enumerate() {
        let z = crate::network::encode_input(&row.to_vec(), &cfg).unwrap();
        x.row_mut(i).assign(&ndarray::ArrayView1::from(&z));
    }
    (x, vec![0, 1, 1, 0])
}

#[test]
fn training_is_deterministic() {
    let (x, y) = xor();
    let data = Samples::new(&x, &y).unwrap();
    let tcfg = TrainConfig {
        learning_rate: 0.01,
        batch_size: 3,
        epochs: 20,
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = Network::init(NeuronModelConfig::training_default(), &[2, 4, 2], 5, InitScheme::positive_mean(1.0)).unwrap();
        let h = train(&mut net, data, Some(data), &tcfg, &LossConfig::default(), &mut NoObserver).unwrap();
        (net, h)
    };
    let (n1, h1) = run();
    let (n2, h2) = run();
    assert_eq!(n1.layers(), n2.layers());
    assert_eq!(h1, h2);
    assert_eq!(h1.epochs.len(), 20);
    assert_eq!(h1.steps, 40);
}

#[test]
fn empty_dataset_rejected() {
    let x = Array2::<f64>::zeros((0, 2));
    let data = Samples::new(&x, &[]).unwrap();
    let mut net = Network::init(NeuronModelConfig::training_default(), &[2, 2], 0, InitScheme::positive_mean(1.0)).unwrap();
    assert!(matches!(
        train(&mut net, data, None, &TrainConfig::default(), &LossConfig::default(), &mut NoObserver),
        Err(Error::EmptyInput)
    ));
}

#[test]
fn history_csv_layout() {
    let h = History {
        epochs: vec![
            EpochRecord {
                epoch: 1,
                loss: 0.5,
                train_acc: 0.25,
                val_acc: None,
            },
            EpochRecord {
                epoch: 2,
                loss: 0.25,
                train_acc: 1.0,
                val_acc: Some(0.75),
            },
        ],
        steps: 2,
    };
    let mut buf = Vec::new();
    h.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,loss,train_acc,val_acc");
    assert_eq!(lines[1], "1,0.5000000000,0.250000,");
    assert_eq!(lines[2], "2,0.2500000000,1.000000,0.750000");
}

#[test]
fn config_round_trip_and_defaults() {
    let cfg = RunConfig::from_toml("schema_version = 1\n").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.k, 100.0);
    assert_eq!(cfg.lambda, 0.001);
    assert_eq!(cfg.batch_size, 128);
    let text = cfg.to_toml();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    assert!(RunConfig::from_toml("schema_version = 2\n").is_err());
    assert!(RunConfig::from_toml("schema_version = 1\nbogus = 3\n").is_err());
    assert!(RunConfig::from_toml("schema_version = 1\nbeta = 0.5\n").is_err());
    let custom = RunConfig::from_toml("schema_version = 1\nK = 5.0\ndenominator = \"all-classes\"\n").unwrap();
    assert_eq!(custom.loss().k, 5.0);
    assert_eq!(custom.loss().denominator, Denominator::AllClasses);
}
