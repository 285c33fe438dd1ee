//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ldgcn::model::{
    backward, forward_batch, init_model, nll_loss, Mode, ModelConfig, ModelParams, Variant,
};
use ldgcn::signal::Label;
use ldgcn::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn toy_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        conv_channels: 4,
        hidden: 16,
        input_len: 16,
        variant,
        ..ModelConfig::default()
    }
}

pub fn random_input(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..cfg.in_channels * cfg.input_len)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(cfg.in_channels, cfg.input_len, data).unwrap()
}

/// A small random training batch with randomised BatchNorm affine terms.
pub struct GradInstance {
    pub cfg: ModelConfig,
    pub params: ModelParams,
    pub inputs: Vec<Matrix>,
    pub labels: Vec<Label>,
}

impl GradInstance {
    pub fn new(variant: Variant, seed: u64) -> Self {
        let cfg = toy_config(variant);
        let mut params = init_model(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919) + 1);
        for g in params.weights.bn_gamma.iter_mut() {
            *g = rng.gen_range(0.5..1.5);
        }
        for b in params.weights.bn_beta.iter_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let inputs = (0..3).map(|_| random_input(&cfg, &mut rng)).collect();
        let labels = vec![Label::Alert, Label::Drowsiness, Label::Drowsiness];
        GradInstance {
            cfg,
            params,
            inputs,
            labels,
        }
    }

    /// Mean NLL and the ReLU gate pattern at `params`.
    pub fn loss(&self, params: &ModelParams) -> (f64, Vec<bool>) {
        let refs: Vec<&Matrix> = self.inputs.iter().collect();
        let cache = forward_batch(params, &self.cfg, &refs, Mode::Train).unwrap();
        let mut loss = 0.0;
        let mut pattern = Vec::new();
        for (item, label) in cache.items().iter().zip(&self.labels) {
            loss += nll_loss(item.log_probs(), label.index()).unwrap();
            pattern.extend(item.relu_pattern());
        }
        (loss / self.labels.len() as f64, pattern)
    }

    pub fn analytic(&self) -> Vec<Vec<f64>> {
        let refs: Vec<&Matrix> = self.inputs.iter().collect();
        let cache = forward_batch(&self.params, &self.cfg, &refs, Mode::Train).unwrap();
        let g = backward(&self.params, &self.cfg, &cache, &self.labels).unwrap();
        g.tensors().into_iter().cloned().collect()
    }

    /// Central difference for value `i` of tensor `t`; `None` when the ReLU
    /// gate pattern differs at either end of the stencil (a kink lies inside).
    pub fn central_difference(&self, t: usize, i: usize, h: f64) -> Option<f64> {
        let (_, base) = self.loss(&self.params);
        let mut plus = self.params.clone();
        plus.weights.tensors_mut()[t][i] += h;
        let mut minus = self.params.clone();
        minus.weights.tensors_mut()[t][i] -= h;
        let (lp, pp) = self.loss(&plus);
        let (lm, pm) = self.loss(&minus);
        if pp != base || pm != base {
            return None;
        }
        Some((lp - lm) / (2.0 * h))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradReport {
    /// Max over tensors of ‖a − n‖₂ / max(‖a‖₂, ‖n‖₂, floor).
    pub max_tensor_rel: f64,
    /// Max over values of |a − n| / max(|a|, |n|, floor).
    pub max_entry_rel: f64,
    pub checked: usize,
    pub kinks: usize,
}

/// `floor` bounds the denominator away from zero so that exactly-zero
/// gradients compared against difference roundoff (about eps·|L|/h) pass.
pub fn check_gradients(inst: &GradInstance, h: f64, floor: f64) -> GradReport {
    let analytic = inst.analytic();
    let mut report = GradReport::default();
    for (t, a_t) in analytic.iter().enumerate() {
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for (i, &a) in a_t.iter().enumerate() {
            let Some(num) = inst.central_difference(t, i, h) else {
                report.kinks += 1;
                continue;
            };
            report.checked += 1;
            diff2 += (a - num) * (a - num);
            a2 += a * a;
            n2 += num * num;
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(floor);
            report.max_entry_rel = report.max_entry_rel.max(rel);
        }
        let rel = diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(floor);
        report.max_tensor_rel = report.max_tensor_rel.max(rel);
    }
    report
}

/// Naive O(N²) DFT of `samples` zero-padded to `padded`.
pub fn naive_dft(samples: &[f64], padded: usize) -> (Vec<f64>, Vec<f64>) {
    use std::f64::consts::PI;
    let mut re = vec![0.0; padded];
    let mut im = vec![0.0; padded];
    for k in 0..padded {
        for (t, &x) in samples.iter().enumerate() {
            let ang = -2.0 * PI * (k * t % padded) as f64 / padded as f64;
            re[k] += x * ang.cos();
            im[k] += x * ang.sin();
        }
    }
    (re, im)
}

/// Band of DFT bin `k`: [lo, hi) except the last band, which is closed.
pub fn bin_band(k: usize, padded: usize, sample_rate: f64, edges: &[f64; 5]) -> Option<usize> {
    let f = k.min(padded - k) as f64 * sample_rate / padded as f64;
    (0..4).find(|&b| f >= edges[b] && (f < edges[b + 1] || (b == 3 && f <= edges[4])))
}

/// Time-domain band signals by brick-wall masking of the naive DFT of the
/// zero-padded input, inverted and truncated to the input length.
pub fn dft_band_signals(
    samples: &[f64],
    sample_rate: f64,
    padded: usize,
    edges: &[f64; 5],
) -> [Vec<f64>; 4] {
    use std::f64::consts::PI;
    let n = samples.len();
    let (re, im) = naive_dft(samples, padded);
    std::array::from_fn(|b| {
        let bins: Vec<usize> = (0..padded)
            .filter(|&k| bin_band(k, padded, sample_rate, edges) == Some(b))
            .collect();
        (0..n)
            .map(|t| {
                let mut v = 0.0;
                for &k in &bins {
                    let ang = 2.0 * PI * (k * t % padded) as f64 / padded as f64;
                    v += re[k] * ang.cos() - im[k] * ang.sin();
                }
                v / padded as f64
            })
            .collect()
    })
}

pub fn dft_band_energies(
    samples: &[f64],
    sample_rate: f64,
    padded: usize,
    edges: &[f64; 5],
) -> [f64; 4] {
    dft_band_signals(samples, sample_rate, padded, edges).map(|s| s.iter().map(|v| v * v).sum())
}

/// Dense double-loop evaluation of the banded edge rule.
pub fn dense_bdsag_oracle(x: &[f64], bdst: &[f64], k: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut w = vec![vec![0.0; n]; n];
    for r in 0..n {
        for c in 0..n {
            if r == c {
                w[r][c] = 1.0;
            } else if r < c && c - r <= k {
                w[r][c] = (x[r] - bdst[c]) / (c - r) as f64;
            } else if c < r && r - c <= k {
                w[r][c] = (x[c] - bdst[r]) / (r - c) as f64;
            }
        }
    }
    w
}

/// Confusion-matrix arithmetic by explicit per-item counting.
pub fn brute_force_metrics(pred: &[usize], truth: &[usize]) -> [f64; 5] {
    let (mut tp, mut tn, mut fp, mut fneg) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fneg += 1,
        }
    }
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let acc = div(tp + tn, tp + tn + fp + fneg);
    let pre = div(tp, tp + fp);
    let rec = div(tp, tp + fneg);
    let spe = div(tn, tn + fp);
    let f1 = if pre + rec > 0.0 {
        2.0 * pre * rec / (pre + rec)
    } else {
        0.0
    };
    [acc, pre, rec, spe, f1]
}

/// Counts floating point operations of one inference by walking every
/// scalar operation of the layer loops.
pub fn brute_force_flops(cfg: &ModelConfig, channel_mask: &[bool], neuron_mask: &[bool]) -> u64 {
    let n = cfg.input_len;
    let mut tally = 0u64;
    let fused = cfg.fused_channels();
    for f in 0..fused {
        if !channel_mask[f] {
            continue;
        }
        let (b, _) = cfg.split_channel(f);
        for _i in 0..n {
            if cfg.has_pointwise() {
                tally += 1; // bias
                for _c in 0..cfg.in_channels {
                    tally += 2;
                }
            }
        }
        let conv = |k: usize, tally: &mut u64| {
            let half = k / 2;
            for i in 0..n {
                *tally += 1;
                for j in 0..k {
                    if i + j >= half && i + j - half < n {
                        *tally += 2;
                    }
                }
            }
        };
        if cfg.has_depthwise() {
            conv(cfg.branch_kernel(b), &mut tally);
        }
        if f < cfg.partial_channels() {
            conv(3, &mut tally);
        }
        for _i in 0..n {
            tally += 4; // BatchNorm
            tally += 1; // pooling accumulate (n - 1 adds + 1 divide)
        }
    }
    let kept_channels = channel_mask.iter().filter(|&&m| m).count() as u64;
    if cfg.has_hidden() {
        for j in 0..cfg.hidden {
            if neuron_mask[j] {
                tally += 2 * kept_channels + 1;
            }
        }
        let kept = neuron_mask.iter().filter(|&&m| m).count() as u64;
        for _c in 0..cfg.n_classes {
            tally += 2 * kept + 1;
        }
    } else {
        for _c in 0..cfg.n_classes {
            tally += 2 * kept_channels + 1;
        }
    }
    tally + 4 * cfg.n_classes as u64
}
