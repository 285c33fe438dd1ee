mod common;

use common::{brute_force_flops, random_input, toy_config};
use ldgcn::bench::model_flops;
use ldgcn::model::{infer, infer_counted, init_model, ModelConfig, ModelParams, Variant};
use ldgcn::pruning::{
    apply_pruning, channel_importance, lowest_importance, nearest_median, neuron_importance, prune,
    prune_count, select_prune_channels, select_prune_neurons, sparse_forward, PruneConfig,
};
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

fn trained_like(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = init_model(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for v in p.bn_running_mean.iter_mut() {
        *v = rng.gen_range(-0.3..0.3);
    }
    for v in p.bn_running_var.iter_mut() {
        *v = rng.gen_range(0.5..2.0);
    }
    for v in p.weights.bn_beta.iter_mut() {
        *v = rng.gen_range(-0.3..0.3);
    }
    p
}

#[test]
fn lowest_importance_examples() {
    let imp = [0.5, 2.0, 1.0, 3.0];
    assert_eq!(lowest_importance(&imp, prune_count(4, 0.25)), vec![0]);
    assert_eq!(lowest_importance(&imp, 2), vec![0, 2]);
    assert_eq!(lowest_importance(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    assert_eq!(lowest_importance(&[2.0, 1.0, 1.0, 0.5], 2), vec![1, 3]);
}

#[test]
fn nearest_median_examples() {
    let imp = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(nearest_median(&imp, prune_count(5, 0.2)), vec![2]);
    assert_eq!(nearest_median(&imp, 3), vec![1, 2, 3]);
    // 2 and 4 are equally far from 3; the lower index wins.
    assert_eq!(nearest_median(&[3.0, 4.0, 2.0, 9.0, 1.0], 2), vec![0, 1]);
}

#[test]
fn importance_of_a_hand_built_channel() {
    let cfg = toy_config(Variant::Full);
    let mut p = ModelParams::zeros(&cfg);
    let (b, t) = cfg.split_channel(3);
    let br = &mut p.weights.branches[b];
    br.pw_w[t * 3..t * 3 + 3].copy_from_slice(&[1.0, -2.0, 0.5]);
    br.pw_b[t] = -1.0;
    let k = cfg.branch_kernel(b);
    br.dw_w[t * k] = 0.25;
    br.dw_b[t] = 0.25;
    let imp = channel_importance(&p, &cfg);
    assert_eq!(imp[3], 5.0);
    assert!(imp.iter().enumerate().all(|(f, &v)| f == 3 || v == 0.0));
    p.weights.fc1_w[2 * cfg.fused_channels() + 1] = -4.0;
    assert_eq!(neuron_importance(&p, &cfg)[2], 4.0);
}

#[test]
fn one_neuron_removes_nineteen_values() {
    let cfg = ModelConfig::default();
    assert_eq!((cfg.hidden, cfg.fused_channels()), (256, 16));
    let p = init_model(&cfg, 0).unwrap();
    let (q, report) = apply_pruning(&p, &cfg, &[], &[5]).unwrap();
    assert_eq!(report.pruned_param_count, 16 + 1 + 2);
    assert_eq!(report.pruned_neuron_indices, vec![5]);
    assert!(!q.neuron_mask[5]);
    assert!(q.weights.fc1_w[5 * 16..6 * 16].iter().all(|&v| v == 0.0));
    assert_eq!(q.weights.fc1_b[5], 0.0);
    assert_eq!((q.weights.fc2_w[5], q.weights.fc2_w[256 + 5]), (0.0, 0.0));
}

#[test]
fn default_prune_counts() {
    let cfg = ModelConfig::default();
    let p = trained_like(&cfg, 1);
    let (_, report) = prune(&p, &cfg, &PruneConfig::default()).unwrap();
    assert_eq!(report.pruned_channel_indices.len(), 2);
    assert_eq!(report.pruned_neuron_indices.len(), 77);
    assert!(report.latency_before_ms.is_none());
}

#[test]
fn pruning_is_idempotent() {
    let cfg = toy_config(Variant::Full);
    let p = trained_like(&cfg, 2);
    let ch = select_prune_channels(&p, &cfg, 0.25).unwrap();
    let ne = select_prune_neurons(&p, &cfg, 0.25).unwrap();
    let (once, r1) = apply_pruning(&p, &cfg, &ch, &ne).unwrap();
    let (twice, r2) = apply_pruning(&once, &cfg, &ch, &ne).unwrap();
    assert_eq!(once, twice);
    assert!(r1.pruned_param_count > 0);
    assert_eq!(r2.pruned_param_count, 0);
    // Masked channels have zero importance, so they are chosen again.
    assert_eq!(select_prune_channels(&once, &cfg, 0.25).unwrap(), ch);
}

#[test]
fn out_of_range_indices_rejected() {
    let cfg = toy_config(Variant::Full);
    let p = trained_like(&cfg, 3);
    assert!(apply_pruning(&p, &cfg, &[cfg.fused_channels()], &[]).is_err());
    assert!(apply_pruning(&p, &cfg, &[], &[cfg.hidden]).is_err());
    let bad = PruneConfig {
        pr_channel: 1.0,
        ..PruneConfig::default()
    };
    assert!(prune(&p, &cfg, &bad).is_err());
}

#[test]
fn all_channels_masked_leaves_the_bias_path() {
    for variant in VARIANTS {
        let cfg = toy_config(variant);
        let p = trained_like(&cfg, 4);
        let all: Vec<usize> = (0..cfg.fused_channels()).collect();
        let (q, _) = apply_pruning(&p, &cfg, &all, &[]).unwrap();
        let w = &q.weights;
        let head = cfg.head_inputs();
        let logits: Vec<f64> = (0..cfg.n_classes)
            .map(|c| {
                let mut acc = w.fc2_b[c];
                if cfg.has_hidden() {
                    for j in 0..cfg.hidden {
                        acc += w.fc2_w[c * head + j] * w.fc1_b[j].max(0.0);
                    }
                }
                acc
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_input(&cfg, &mut rng);
        let (out, _) = sparse_forward(&q, &cfg, &x).unwrap();
        for (o, l) in out.iter().zip(&logits) {
            assert!((o - (l - lse)).abs() < 1e-12, "{variant:?}");
        }
        assert_eq!(out, infer(&q, &cfg, &x).unwrap());
    }
}

#[test]
fn dense_flops_of_default_model() {
    let cfg = ModelConfig::default();
    let full_c = vec![true; cfg.fused_channels()];
    let full_n = vec![true; cfg.hidden_neurons()];
    assert_eq!(
        model_flops(&cfg, &full_c, &full_n),
        brute_force_flops(&cfg, &full_c, &full_n)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sparse_matches_dense_and_flop_count(seed in any::<u64>(), v in 0usize..6) {
        let cfg = toy_config(VARIANTS[v]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = trained_like(&cfg, seed);
        let ch: Vec<usize> = (0..cfg.fused_channels()).filter(|_| rng.gen_bool(0.3)).collect();
        let ne: Vec<usize> = (0..cfg.hidden_neurons()).filter(|_| rng.gen_bool(0.3)).collect();
        let (q, _) = apply_pruning(&p, &cfg, &ch, &ne).unwrap();
        let x = random_input(&cfg, &mut rng);
        let (sparse, flops) = sparse_forward(&q, &cfg, &x).unwrap();
        let dense = infer(&q, &cfg, &x).unwrap();
        prop_assert_eq!(
            sparse.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            dense.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(flops, model_flops(&cfg, &q.channel_mask, &q.neuron_mask));
        prop_assert_eq!(flops, brute_force_flops(&cfg, &q.channel_mask, &q.neuron_mask));
        let (_, dense_flops) = infer_counted(&q, &cfg, &x, false).unwrap();
        let full_c = vec![true; cfg.fused_channels()];
        let full_n = vec![true; cfg.hidden_neurons()];
        prop_assert_eq!(dense_flops, model_flops(&cfg, &full_c, &full_n));
    }

    #[test]
    fn flops_strictly_decrease(seed in any::<u64>(), v in 0usize..6) {
        let cfg = toy_config(VARIANTS[v]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cm = vec![true; cfg.fused_channels()];
        let mut nm = vec![true; cfg.hidden_neurons()];
        let mut last = model_flops(&cfg, &cm, &nm);
        let mut order: Vec<(bool, usize)> = (0..cm.len()).map(|i| (true, i))
            .chain((0..nm.len()).map(|j| (false, j)))
            .collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        for (is_channel, i) in order {
            if is_channel { cm[i] = false } else { nm[i] = false }
            let now = model_flops(&cfg, &cm, &nm);
            prop_assert!(now < last, "{now} !< {last}");
            last = now;
        }
    }

    #[test]
    fn report_matches_masks(seed in any::<u64>(), pc in 0.0f64..0.9, pn in 0.0f64..0.9) {
        let cfg = toy_config(Variant::Full);
        let p = trained_like(&cfg, seed);
        let (q, r) = prune(&p, &cfg, &PruneConfig { pr_channel: pc, pr_neuron: pn }).unwrap();
        prop_assert_eq!(r.pruned_channel_indices.len(), prune_count(cfg.fused_channels(), pc));
        prop_assert_eq!(r.pruned_neuron_indices.len(), prune_count(cfg.hidden, pn));
        let masked_c: Vec<usize> = (0..cfg.fused_channels()).filter(|&f| !q.channel_mask[f]).collect();
        let masked_n: Vec<usize> = (0..cfg.hidden).filter(|&j| !q.neuron_mask[j]).collect();
        prop_assert_eq!(&masked_c, &r.pruned_channel_indices);
        prop_assert_eq!(&masked_n, &r.pruned_neuron_indices);
        prop_assert_eq!(r.pruned_param_count, q.masked_count(&cfg));
        // Untouched values keep their exact value.
        let keep = q.keep_map(&cfg);
        for ((a, b), k) in p.weights.flatten().iter().zip(q.weights.flatten()).zip(keep.flatten()) {
            if k == 1.0 { prop_assert_eq!(a.to_bits(), b.to_bits()); } else { prop_assert_eq!(b, 0.0); }
        }
    }
}
