mod common;

use common::{random_input, toy_config};
use ldgcn::model::{
    adam_step, argmax, checkpoint::Checkpoint, forward_batch, infer, init_model, nll_loss, train,
    AdamState, Mode, ModelConfig, ModelParams, TrainConfig, Variant, Weights,
};
use ldgcn::signal::Label;
use ldgcn::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VARIANTS: [Variant; 6] = [
    Variant::Full,
    Variant::SingleBranch,
    Variant::NoPointwise,
    Variant::NoDepthwise,
    Variant::NoPartialConv,
    Variant::SingleFc,
];

fn random_masks(params: &mut ModelParams, rng: &mut ChaCha8Rng) {
    for m in params.channel_mask.iter_mut() {
        *m = rng.gen_bool(0.7);
    }
    for m in params.neuron_mask.iter_mut() {
        *m = rng.gen_bool(0.7);
    }
}

fn randomise_bn(params: &mut ModelParams, rng: &mut ChaCha8Rng) {
    for g in params.weights.bn_gamma.iter_mut() {
        *g = rng.gen_range(0.5..1.5);
    }
    for b in params.weights.bn_beta.iter_mut() {
        *b = rng.gen_range(-0.5..0.5);
    }
    for m in params.bn_running_mean.iter_mut() {
        *m = rng.gen_range(-0.5..0.5);
    }
    for v in params.bn_running_var.iter_mut() {
        *v = rng.gen_range(0.5..2.0);
    }
}

/// Two linearly separable classes: drowsy inputs carry a positive offset.
fn separable(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<(Matrix, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 {
                Label::Alert
            } else {
                Label::Drowsiness
            };
            let shift = if label == Label::Drowsiness {
                1.0
            } else {
                -1.0
            };
            let data = (0..cfg.in_channels * cfg.input_len)
                .map(|_| shift + rng.gen_range(-0.5..0.5))
                .collect();
            (
                Matrix::from_vec(cfg.in_channels, cfg.input_len, data).unwrap(),
                label,
            )
        })
        .collect()
}

#[test]
fn odd_channel_count_rejected() {
    let cfg = ModelConfig {
        conv_channels: 3,
        ..ModelConfig::default()
    };
    assert!(init_model(&cfg, 0).is_err());
}

#[test]
fn zero_model_predicts_uniform() {
    let cfg = toy_config(Variant::Full);
    let p = ModelParams::zeros(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = infer(&p, &cfg, &random_input(&cfg, &mut rng)).unwrap();
    let half = 0.5f64.ln();
    assert!((out[0] - half).abs() < 1e-15 && (out[1] - half).abs() < 1e-15);
}

#[test]
fn wrong_input_shape_rejected() {
    let cfg = toy_config(Variant::Full);
    let p = init_model(&cfg, 0).unwrap();
    let m = Matrix::zeros(cfg.in_channels, cfg.input_len + 1);
    assert!(infer(&p, &cfg, &m).is_err());
}

#[test]
fn nll_examples() {
    let lp = [0.25f64.ln(), 0.75f64.ln()];
    assert!((nll_loss(&lp, 0).unwrap() - 4f64.ln()).abs() < 1e-15);
    assert!((nll_loss(&lp, 1).unwrap() + 0.75f64.ln()).abs() < 1e-15);
    assert!(nll_loss(&lp, 2).is_err());
    assert_eq!(argmax(&lp), 1);
}

/// Scalar Adam written out from the textbook recurrences.
fn adam_oracle(grads: &[f64], tc: &TrainConfig) -> f64 {
    let (mut w, mut m, mut v) = (0.0, 0.0, 0.0);
    for (i, &g) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        m = tc.beta1 * m + (1.0 - tc.beta1) * g;
        v = tc.beta2 * v + (1.0 - tc.beta2) * g * g;
        let mh = m / (1.0 - tc.beta1.powi(t));
        let vh = v / (1.0 - tc.beta2.powi(t));
        w -= tc.learning_rate * mh / (vh.sqrt() + tc.epsilon);
    }
    w
}

#[test]
fn adam_matches_scalar_recurrence() {
    let cfg = toy_config(Variant::Full);
    let tc = TrainConfig::default();
    let seq = [0.3, -1.2, 2.5, 0.0, -0.7];
    let mut p = ModelParams::zeros(&cfg);
    let mut st = AdamState::new(&cfg);
    for (i, &g) in seq.iter().enumerate() {
        let mut grads = Weights::zeros(&cfg);
        grads.fc2_b[1] = g;
        grads.fusion_w[0] = -g;
        adam_step(&mut p, &cfg, &grads, &mut st, &tc, i as u64 + 1);
    }
    let want = adam_oracle(&seq, &tc);
    assert!((p.weights.fc2_b[1] - want).abs() < 1e-15);
    let neg: Vec<f64> = seq.iter().map(|g| -g).collect();
    assert!((p.weights.fusion_w[0] - adam_oracle(&neg, &tc)).abs() < 1e-15);
    assert_eq!(p.weights.fc2_b[0], 0.0);
}

#[test]
fn training_is_deterministic() {
    let cfg = toy_config(Variant::Full);
    let data = separable(&cfg, 12, 3);
    let tc = TrainConfig {
        epochs: 4,
        batch_size: 5,
        seed: 11,
        ..TrainConfig::default()
    };
    let (pa, ha) = train(&data, &cfg, &tc).unwrap();
    let (pb, hb) = train(&data, &cfg, &tc).unwrap();
    assert_eq!(pa, pb);
    assert_eq!(ha, hb);
    let (pc, _) = train(&data, &cfg, &TrainConfig { seed: 12, ..tc }).unwrap();
    assert_ne!(pa, pc);
}

#[test]
fn batch_larger_than_dataset() {
    let cfg = toy_config(Variant::Full);
    let data = separable(&cfg, 6, 4);
    let tc = TrainConfig {
        epochs: 2,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let (_, h) = train(&data, &cfg, &tc).unwrap();
    assert_eq!(h.epochs.len(), 2);
    assert!(train(&[], &cfg, &tc).is_err());
}

#[test]
fn every_variant_fits_separable_data() {
    for variant in VARIANTS {
        let cfg = toy_config(variant);
        let data = separable(&cfg, 40, 5);
        let tc = TrainConfig {
            epochs: 40,
            learning_rate: 0.01,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (p, h) = train(&data, &cfg, &tc).unwrap();
        let first = h.epochs.first().unwrap().mean_loss;
        let last = h.epochs.last().unwrap().mean_loss;
        assert!(last < first, "{variant:?}: {first} -> {last}");
        let correct = data
            .iter()
            .filter(|(x, y)| argmax(&infer(&p, &cfg, x).unwrap()) == y.index())
            .count();
        assert!(correct * 100 >= 95 * data.len(), "{variant:?}: {correct}");
    }
}

/// Swaps the two equal-kernel branches. Fused channels are interleaved as
/// `t * 2 + b`, so every per-channel quantity moves from `f` to `f ^ 1`.
fn swap_branches(p: &ModelParams, cfg: &ModelConfig) -> ModelParams {
    let mut q = p.clone();
    q.weights.branches.swap(0, 1);
    let fused = cfg.fused_channels();
    let perm = |v: &Vec<f64>| -> Vec<f64> { (0..v.len()).map(|f| v[f ^ 1]).collect() };
    q.weights.bn_gamma = perm(&p.weights.bn_gamma);
    q.weights.bn_beta = perm(&p.weights.bn_beta);
    q.bn_running_mean = perm(&p.bn_running_mean);
    q.bn_running_var = perm(&p.bn_running_var);
    q.weights.fusion_b = perm(&p.weights.fusion_b);
    for f in 0..cfg.partial_channels() {
        for j in 0..3 {
            q.weights.fusion_w[f * 3 + j] = p.weights.fusion_w[(f ^ 1) * 3 + j];
        }
    }
    for j in 0..cfg.hidden_neurons() {
        for f in 0..fused {
            q.weights.fc1_w[j * fused + f] = p.weights.fc1_w[j * fused + (f ^ 1)];
        }
    }
    q.channel_mask = (0..fused).map(|f| p.channel_mask[f ^ 1]).collect();
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_are_log_probabilities(seed in any::<u64>(), v in 0usize..6) {
        let cfg = toy_config(VARIANTS[v]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = init_model(&cfg, seed).unwrap();
        randomise_bn(&mut p, &mut rng);
        let x = random_input(&cfg, &mut rng);
        let out = infer(&p, &cfg, &x).unwrap();
        let total: f64 = out.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|l| *l <= 0.0));
    }

    #[test]
    fn masking_equals_zeroed_dense(seed in any::<u64>(), v in 0usize..6) {
        let cfg = toy_config(VARIANTS[v]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut masked = init_model(&cfg, seed).unwrap();
        randomise_bn(&mut masked, &mut rng);
        random_masks(&mut masked, &mut rng);
        masked.apply_masks(&cfg);
        let mut dense = masked.clone();
        dense.channel_mask.fill(true);
        dense.neuron_mask.fill(true);
        let inputs: Vec<Matrix> = (0..3).map(|_| random_input(&cfg, &mut rng)).collect();
        for x in &inputs {
            prop_assert_eq!(infer(&masked, &cfg, x).unwrap(), infer(&dense, &cfg, x).unwrap());
        }
        let refs: Vec<&Matrix> = inputs.iter().collect();
        let a = forward_batch(&masked, &cfg, &refs, Mode::Train).unwrap();
        let b = forward_batch(&dense, &cfg, &refs, Mode::Train).unwrap();
        for (ia, ib) in a.items().iter().zip(b.items()) {
            prop_assert_eq!(ia.log_probs(), ib.log_probs());
        }
    }

    #[test]
    fn branch_swap_equivariance(seed in any::<u64>(), masked in any::<bool>()) {
        let cfg = ModelConfig { kernel_b: 3, ..toy_config(Variant::Full) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = init_model(&cfg, seed).unwrap();
        randomise_bn(&mut p, &mut rng);
        if masked {
            random_masks(&mut p, &mut rng);
            p.apply_masks(&cfg);
        }
        let q = swap_branches(&p, &cfg);
        let inputs: Vec<Matrix> = (0..3).map(|_| random_input(&cfg, &mut rng)).collect();
        for x in &inputs {
            let a = infer(&p, &cfg, x).unwrap();
            let b = infer(&q, &cfg, x).unwrap();
            for (u, w) in a.iter().zip(&b) {
                prop_assert!((u - w).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
        let refs: Vec<&Matrix> = inputs.iter().collect();
        let a = forward_batch(&p, &cfg, &refs, Mode::Train).unwrap();
        let b = forward_batch(&q, &cfg, &refs, Mode::Train).unwrap();
        for (ia, ib) in a.items().iter().zip(b.items()) {
            for (u, w) in ia.log_probs().iter().zip(ib.log_probs()) {
                prop_assert!((u - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), v in 0usize..6, c in 1usize..5, h in 8usize..24) {
        let cfg = ModelConfig {
            conv_channels: 2 * c,
            hidden: h,
            input_len: 8,
            variant: VARIANTS[v],
            ..ModelConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = init_model(&cfg, seed).unwrap();
        randomise_bn(&mut p, &mut rng);
        random_masks(&mut p, &mut rng);
        p.apply_masks(&cfg);
        for t in p.weights.tensors_mut() {
            t.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
        for t in [&mut p.bn_running_mean, &mut p.bn_running_var] {
            t.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
        let bytes = Checkpoint::from_params(&cfg, &p).to_bytes();
        let (cfg2, p2) = Checkpoint::read(&bytes[..]).unwrap().to_params().unwrap();
        prop_assert_eq!(&cfg2, &cfg);
        prop_assert_eq!(&p2, &p);
        prop_assert_eq!(Checkpoint::from_params(&cfg2, &p2).to_bytes(), bytes.clone());
        for cut in [0, 3, bytes.len() / 2, bytes.len() - 1] {
            prop_assert!(Checkpoint::read(&bytes[..cut]).is_err());
        }
    }
}
