use super::*;
use crate::oracle::{integrate_membrane, IntegratorConfig};
use std::f64::consts::E;

fn zs(v: &[f64]) -> Vec<NeuronValue> {
    v.iter().map(|&z| NeuronValue::new(z).unwrap()).collect()
}

fn enc(cfg: &NeuronModelConfig, ts: &[f64]) -> Vec<NeuronValue> {
    ts.iter()
        .map(|&t| encode_value(SpikeTime::new(t).unwrap(), cfg).unwrap())
        .collect()
}

fn oracle_time(cfg: &NeuronModelConfig, ts: &[f64], w: &[f64]) -> SpikeTime {
    let t: Vec<SpikeTime> = ts.iter().map(|&t| SpikeTime::new(t).unwrap()).collect();
    integrate_membrane(&t, w, cfg, &IntegratorConfig::default())
        .unwrap()
        .crossing
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn encode_examples() {
    let cfg = NeuronModelConfig::training_default();
    let z0 = encode_value(SpikeTime::new(0.0).unwrap(), &cfg).unwrap();
    assert_eq!(z0.raw(), 1.0);
    let z = encode_value(SpikeTime::new(0.6).unwrap(), &cfg).unwrap();
    assert!((z.raw() - 1.822_119).abs() < 1e-6);
    assert_eq!(
        encode_value(SpikeTime::NO_SPIKE, &cfg).unwrap(),
        NeuronValue::NO_SPIKE
    );
    assert!(SpikeTime::new(-0.1).is_err());
}

#[test]
fn encodings_per_variant() {
    let t = 0.7;
    let st = SpikeTime::new(t).unwrap();
    let check = |cfg: NeuronModelConfig, expected: f64| {
        let z = encode_value(st, &cfg).unwrap().raw();
        assert!((z - expected).abs() < 1e-12, "{}: {z} vs {expected}", cfg.variant());
        assert!((cfg.decode(NeuronValue::new(z).unwrap()).raw() - t).abs() < 1e-12);
    };
    check(NeuronModelConfig::nlif_step(1.0, 1.0, 2.0).unwrap(), 2.0 * t);
    check(NeuronModelConfig::nlif_exp(2.0, 1.0, 1.5).unwrap(), 1.5 * (t / 2.0).exp());
    check(NeuronModelConfig::lif_step(1.0, 0.3, 1.0, 1.0).unwrap(), (0.3 * t).exp());
    check(NeuronModelConfig::lif_exp_bt1(1.0, 1.0, 3.0).unwrap(), 3.0 * t);
    check(NeuronModelConfig::lif_exp_bthalf(2.0, 1.0, 1.0).unwrap(), (t / 4.0).exp());
}

#[test]
fn config_rejects_bad_products() {
    assert!(NeuronModelConfig::new(NeuronModel::LifExpBt1, 1.0, 1.0, 0.9, 1.0, 1.0).is_err());
    assert!(NeuronModelConfig::new(NeuronModel::LifExpBtHalf, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    assert!(NeuronModelConfig::new(NeuronModel::LifStep, 1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    assert!(NeuronModelConfig::new(NeuronModel::NlifExp, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
    assert!(NeuronModelConfig::new(NeuronModel::NlifExp, 1.0, 1.0, 0.0, -1.0, 1.0).is_err());
}

#[test]
fn nlif_step_single_input() {
    let cfg = NeuronModelConfig::nlif_step(1.0, 1.0, 1.0).unwrap();
    let (z, c) = spike_time_nlif_step(&enc(&cfg, &[0.5]), &[1.0], &cfg).unwrap();
    assert!((z.raw() - 1.5).abs() < 1e-15);
    assert_eq!(c.indices, vec![0]);
    let (z, _) = spike_time_nlif_step(&enc(&cfg, &[0.0]), &[2.0], &cfg).unwrap();
    assert!((z.raw() - 0.5).abs() < 1e-15);
}

#[test]
fn nlif_step_empty_input_rejected() {
    let cfg = NeuronModelConfig::nlif_step(1.0, 1.0, 1.0).unwrap();
    assert!(matches!(
        spike_time_nlif_step(&[], &[], &cfg),
        Err(Error::EmptyInput)
    ));
}

#[test]
fn variant_specific_entry_points_check_the_config() {
    let cfg = NeuronModelConfig::training_default();
    assert!(spike_time_lif_step(&zs(&[1.0]), &[2.0], &cfg).is_err());
}

#[test]
fn nlif_exp_examples() {
    let cfg = NeuronModelConfig::training_default();
    let (z, _) = spike_time_nlif_exp(&zs(&[1.7]), &[2.0], &cfg).unwrap();
    assert!((z.raw() - 3.4).abs() < 1e-12);

    // First prefix 3/(3-1) = 1.5 falls in (1, 2].
    let (z, c) = spike_time_nlif_exp(&zs(&[1.0, 2.0]), &[3.0, 1.0], &cfg).unwrap();
    assert!((z.raw() - 1.5).abs() < 1e-15);
    assert_eq!(c.indices, vec![0]);

    // First prefix gives 0.5/(0.5-1) = -1, second 6.5/2.5 = 2.6.
    let (z, c) = spike_time_nlif_exp(&zs(&[1.0, 2.0]), &[0.5, 3.0], &cfg).unwrap();
    assert!((z.raw() - 2.6).abs() < 1e-15);
    assert_eq!(c.indices, vec![0, 1]);
}

#[test]
fn nlif_exp_examples_agree_with_oracle_and_enumeration() {
    let cfg = NeuronModelConfig::training_default();
    for (zv, w, expected) in [
        ([1.0, 2.0], [3.0, 1.0], 1.5),
        ([1.0, 2.0], [0.5, 3.0], 2.6),
    ] {
        // Brute force over prefixes, independent of the cumulative-sum code.
        let mut found = None;
        for k in 1..=2 {
            let num: f64 = (0..k).map(|i| zv[i] * w[i]).sum();
            let den: f64 = (0..k).map(|i| w[i]).sum::<f64>() - 1.0;
            let c = num / den;
            let next = if k < 2 { zv[k] } else { f64::INFINITY };
            if c > zv[k - 1] && c <= next {
                found = Some(c);
                break;
            }
        }
        assert!((found.unwrap() - expected).abs() < 1e-15);
        let ts: Vec<f64> = zv.iter().map(|z: &f64| z.ln()).collect();
        let t = oracle_time(&cfg, &ts, &w);
        assert!(rel(t.raw(), expected.ln()) < 1e-6, "{t:?} vs {}", expected.ln());
    }
}

#[test]
fn nlif_exp_denominator_pole_is_invalid() {
    let cfg = NeuronModelConfig::training_default();
    let (z, c) = spike_time_nlif_exp(&zs(&[1.0]), &[1.0], &cfg).unwrap();
    assert_eq!(z, NeuronValue::NO_SPIKE);
    assert!(c.indices.is_empty());
}

#[test]
fn lif_step_examples() {
    // b v0 / a = 1
    let cfg = NeuronModelConfig::lif_step(1.0, 1.0, 1.0, 1.0).unwrap();
    let z_in = (1.0f64 * 0.4).exp();
    let (z, _) = spike_time_lif_step(&zs(&[z_in]), &[2.0], &cfg).unwrap();
    assert!((z.raw() - 2.0 * z_in).abs() < 1e-12);
}

#[test]
fn lif_step_small_leak_approaches_nonleaky() {
    let ts = [0.2, 0.9, 1.4];
    let w = [0.6, 0.5, 0.7];
    let cn = NeuronModelConfig::nlif_step(1.0, 1.0, 1.0).unwrap();
    let (zn, _) = forward_neuron(&enc(&cn, &ts), &w, &cn).unwrap();
    let cl = NeuronModelConfig::lif_step(1.0, 1e-6, 1.0, 1.0).unwrap();
    let (zl, _) = forward_neuron(&enc(&cl, &ts), &w, &cl).unwrap();
    let tn = cn.decode(zn).raw();
    let tl = cl.decode(zl).raw();
    assert!((tn - tl).abs() < 1e-4, "{tn} vs {tl}");
}

#[test]
fn lif_exp_bt1_examples() {
    let cfg = NeuronModelConfig::lif_exp_bt1(1.0, 1.0, 1.0).unwrap();
    // Peak of w t e^{-t} equals v0 exactly at t = 1.
    let (z, c) = spike_time_lif_exp_bt1(&enc(&cfg, &[0.0]), &[E], &cfg).unwrap();
    assert!((z.raw() - 1.0).abs() < 1e-6, "{z:?}");
    assert_eq!(c.indices, vec![0]);
    let (z, _) = spike_time_lif_exp_bt1(&enc(&cfg, &[0.0]), &[0.99 * E], &cfg).unwrap();
    assert_eq!(z, NeuronValue::NO_SPIKE);
}

#[test]
fn lif_exp_bt1_random_positive_weights_match_oracle() {
    let cfg = NeuronModelConfig::lif_exp_bt1(1.0, 1.0, 1.0).unwrap();
    let ts = [0.3, 1.1, 0.6];
    let w = [1.8, 1.2, 2.4];
    let (z, _) = forward_neuron(&enc(&cfg, &ts), &w, &cfg).unwrap();
    let t = oracle_time(&cfg, &ts, &w);
    assert!(rel(cfg.decode(z).raw(), t.raw()) < 1e-6, "{z:?} {t:?}");
}

#[test]
fn lif_exp_bthalf_examples() {
    let cfg = NeuronModelConfig::lif_exp_bthalf(1.0, 1.0, 1.0).unwrap();
    let (z, _) = spike_time_lif_exp_bthalf(&enc(&cfg, &[0.0]), &[5.0], &cfg).unwrap();
    let t = oracle_time(&cfg, &[0.0], &[5.0]);
    // Root y = 5 - sqrt(15), t = 2 ln y.
    let expected = 2.0 * (5.0 - 15f64.sqrt()).ln();
    assert!((cfg.decode(z).raw() - expected).abs() < 1e-12);
    assert!(rel(expected, t.raw()) < 1e-6, "{expected} vs {t:?}");

    let (z, _) = spike_time_lif_exp_bthalf(&enc(&cfg, &[0.0, 0.5]), &[0.0, 0.0], &cfg).unwrap();
    assert_eq!(z, NeuronValue::NO_SPIKE);
}

#[test]
fn lif_exp_bthalf_tangency() {
    // Single input at 0 with w = 2: discriminant 4 - 4 = 0, peak v = v0 at
    // t = 2 ln 2.
    let cfg = NeuronModelConfig::lif_exp_bthalf(1.0, 1.0, 1.0).unwrap();
    let (z, _) = spike_time_lif_exp_bthalf(&enc(&cfg, &[0.0]), &[2.0], &cfg).unwrap();
    let t = cfg.decode(z).raw();
    // Oracle peak time: threshold slightly below the tangent value.
    let cfg_lo = cfg.with_v0(1.0 - 1e-12).unwrap();
    let peak = oracle_time(&cfg_lo, &[0.0], &[2.0]);
    assert!((t - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!((t - peak.raw()).abs() < 1e-5, "{t} vs {peak:?}");
}

#[test]
fn forward_matches_single_prefix_dispatch() {
    for variant in NeuronModel::ALL {
        let cfg = NeuronModelConfig::default_for(variant);
        let z = enc(&cfg, &[0.2]);
        let a = forward_neuron(&z, &[3.0], &cfg).unwrap();
        let b = match variant {
            NeuronModel::NlifStep => spike_time_nlif_step(&z, &[3.0], &cfg),
            NeuronModel::NlifExp => spike_time_nlif_exp(&z, &[3.0], &cfg),
            NeuronModel::LifStep => spike_time_lif_step(&z, &[3.0], &cfg),
            NeuronModel::LifExpBt1 => spike_time_lif_exp_bt1(&z, &[3.0], &cfg),
            NeuronModel::LifExpBtHalf => spike_time_lif_exp_bthalf(&z, &[3.0], &cfg),
        }
        .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn forward_rejects_mismatched_lengths() {
    let cfg = NeuronModelConfig::training_default();
    assert!(matches!(
        forward_neuron(&zs(&[1.0, 2.0]), &[1.0], &cfg),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn all_no_spike_inputs_give_no_spike() {
    let cfg = NeuronModelConfig::training_default();
    let z = vec![NeuronValue::NO_SPIKE; 3];
    let (out, c) = forward_neuron(&z, &[5.0, 5.0, 5.0], &cfg).unwrap();
    assert_eq!(out, NeuronValue::NO_SPIKE);
    assert!(c.indices.is_empty());
}

#[test]
fn no_spike_inputs_are_never_causal() {
    let cfg = NeuronModelConfig::training_default();
    let z = vec![NeuronValue::new(1.0).unwrap(), NeuronValue::NO_SPIKE];
    let (out, c) = forward_neuron(&z, &[1.2, 5.0], &cfg).unwrap();
    assert!((out.raw() - 6.0).abs() < 1e-12);
    assert_eq!(c.indices, vec![0]);
}

#[test]
fn permutation_does_not_change_output() {
    let cfg = NeuronModelConfig::training_default();
    let z = zs(&[1.3, 2.1, 1.05, 3.0]);
    let w = [0.7, -0.2, 0.9, 1.4];
    let (a, ca) = forward_neuron(&z, &w, &cfg).unwrap();
    let perm = [2, 0, 3, 1];
    let zp: Vec<_> = perm.iter().map(|&i| z[i]).collect();
    let wp: Vec<_> = perm.iter().map(|&i| w[i]).collect();
    let (b, cb) = forward_neuron(&zp, &wp, &cfg).unwrap();
    assert_eq!(a, b);
    let mapped: Vec<usize> = cb.indices.iter().map(|&i| perm[i]).collect();
    assert_eq!(mapped, ca.indices);
}

#[test]
fn ties_break_by_index() {
    let cfg = NeuronModelConfig::training_default();
    let (_, c) = forward_neuron(&zs(&[1.0, 1.0, 1.0]), &[1.0, 1.0, 1.0], &cfg).unwrap();
    // Prefixes of equal values can only be valid once all tied inputs are in.
    assert_eq!(c.indices, vec![0, 1, 2]);
}

#[test]
fn candidate_equal_to_next_input_is_accepted() {
    // 3 z1 / (3 - 1) with z1 = 2 gives exactly 3 = z2.
    let cfg = NeuronModelConfig::training_default();
    let (out, c) = forward_neuron(&zs(&[2.0, 3.0]), &[3.0, 1.0], &cfg).unwrap();
    assert_eq!(out.raw(), 3.0);
    assert_eq!(c.indices, vec![0]);
}

#[test]
fn grad_examples() {
    let cfg = NeuronModelConfig::training_default();
    let z = zs(&[1.0]);
    let (out, c) = forward_neuron(&z, &[2.0], &cfg).unwrap();
    let (dz, dw) = grad_neuron(&z, &[2.0], &c, out, &cfg).unwrap();
    assert!((dz[0] - 2.0).abs() < 1e-15);
    assert!((dw[0] + 1.0).abs() < 1e-15);

    let z = zs(&[1.0, 2.0]);
    let w = [3.0, 1.0];
    let (out, c) = forward_neuron(&z, &w, &cfg).unwrap();
    let (dz, dw) = grad_neuron(&z, &w, &c, out, &cfg).unwrap();
    assert_eq!(dz, vec![1.5, 0.0]);
    assert_eq!(dw, vec![-0.25, 0.0]);
}

#[test]
fn grad_matches_finite_differences_on_example() {
    let cfg = NeuronModelConfig::training_default();
    let z = [1.0, 2.0];
    let w = [3.0, 1.0];
    let f = |z: &[f64], w: &[f64]| forward_neuron(&zs(z), w, &cfg).unwrap().0.raw();
    let h = 1e-6;
    let (out, c) = forward_neuron(&zs(&z), &w, &cfg).unwrap();
    let (dz, dw) = grad_neuron(&zs(&z), &w, &c, out, &cfg).unwrap();
    for i in 0..2 {
        let mut zp = z;
        let mut zm = z;
        zp[i] += h;
        zm[i] -= h;
        let fd = (f(&zp, &w) - f(&zm, &w)) / (2.0 * h);
        assert!((fd - dz[i]).abs() < 1e-6, "dz[{i}] {fd} vs {}", dz[i]);
        let mut wp = w;
        let mut wm = w;
        wp[i] += h;
        wm[i] -= h;
        let fd = (f(&z, &wp) - f(&z, &wm)) / (2.0 * h);
        assert!((fd - dw[i]).abs() < 1e-6, "dw[{i}] {fd} vs {}", dw[i]);
    }
}

#[test]
fn grad_of_silent_neuron_is_zero() {
    let cfg = NeuronModelConfig::training_default();
    let z = zs(&[1.0, 2.0]);
    let (dz, dw) = grad_neuron(&z, &[0.1, 0.1], &CausalSet::empty(), NeuronValue::NO_SPIKE, &cfg)
        .unwrap();
    assert_eq!(dz, vec![0.0, 0.0]);
    assert_eq!(dw, vec![0.0, 0.0]);
}

#[test]
fn grad_rejects_inconsistent_causal_sets() {
    let cfg = NeuronModelConfig::training_default();
    let z = zs(&[1.0, 2.0]);
    let out = NeuronValue::new(2.6).unwrap();
    let bad = CausalSet { indices: vec![1] };
    assert!(matches!(
        grad_neuron(&z, &[0.5, 3.0], &bad, out, &cfg),
        Err(Error::InconsistentCausalSet(_))
    ));
    let oob = CausalSet { indices: vec![0, 5] };
    assert!(grad_neuron(&z, &[0.5, 3.0], &oob, out, &cfg).is_err());
}

#[test]
fn grad_rejects_non_rational_variants() {
    let cfg = NeuronModelConfig::default_for(NeuronModel::LifExpBt1);
    let z = zs(&[0.0]);
    let c = CausalSet { indices: vec![0] };
    assert!(matches!(
        grad_neuron(&z, &[3.0], &c, NeuronValue::new(0.5).unwrap(), &cfg),
        Err(Error::UnsupportedVariant(_))
    ));
}

#[test]
fn replay_reproduces_forward() {
    for variant in NeuronModel::ALL {
        let cfg = NeuronModelConfig::default_for(variant);
        let z = enc(&cfg, &[0.1, 0.4, 0.9, 1.5]);
        let w = [1.2, 0.9, 1.5, -0.3];
        let (out, c) = forward_neuron(&z, &w, &cfg).unwrap();
        assert_eq!(replay_causal_set(&z, &w, &c, &cfg).unwrap(), out, "{variant}");
    }
}
