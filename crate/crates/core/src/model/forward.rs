//! Forward computation.
//!
//! Layer order: per branch pointwise (in → C) then depthwise (kernel 3 or 5),
//! interleaved concatenation, partial convolution over the leading fused
//! channels, ReLU, BatchNorm, global average pooling, FC1 + ReLU, FC2 and
//! log-softmax. All convolutions run along the node axis with zero padding.

use super::config::{ModelConfig, BN_EPS, FUSION_KERNEL};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// BatchNorm uses batch statistics.
    Train,
    /// BatchNorm uses running statistics.
    Infer,
}

/// Activations of one item, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ItemCache {
    pub(crate) input: Matrix,
    /// Per branch, `width × n` pointwise output (the input itself when the
    /// pointwise stage is ablated).
    pub(crate) pw_out: Vec<Vec<f64>>,
    /// `fused × n`, before the partial convolution.
    pub(crate) fused: Vec<f64>,
    /// `fused × n`, after the partial convolution and before ReLU.
    pub(crate) pre_relu: Vec<f64>,
    /// `fused × n` normalised activations.
    pub(crate) normed: Vec<f64>,
    pub(crate) pooled: Vec<f64>,
    pub(crate) hidden_pre: Vec<f64>,
    pub(crate) hidden: Vec<f64>,
    pub(crate) log_probs: Vec<f64>,
}

impl ItemCache {
    /// ReLU gate pattern of the convolutional and hidden stages.
    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn relu_pattern(&self) -> Vec<bool> {
        self.pre_relu
            .iter()
            .chain(&self.hidden_pre)
            .map(|&v| v > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) mode: Mode,
    pub(crate) items: Vec<ItemCache>,
    pub(crate) bn_mean: Vec<f64>,
    /// Biased batch variance.
    pub(crate) bn_var: Vec<f64>,
    pub(crate) n: usize,
}

impl ForwardCache {
    pub fn items(&self) -> &[ItemCache] {
        &self.items
    }

    pub fn batch_mean(&self) -> &[f64] {
        &self.bn_mean
    }

    pub fn batch_var(&self) -> &[f64] {
        &self.bn_var
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

pub(crate) fn pointwise_channel(w_row: &[f64], bias: f64, input: &Matrix, out: &mut [f64]) {
    out.fill(bias);
    for (c, &w) in w_row.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(input.row(c)) {
            *o += w * x;
        }
    }
}

/// Same-length 1-D convolution with zero padding.
pub(crate) fn conv_channel(kernel: &[f64], bias: f64, src: &[f64], out: &mut [f64]) {
    let n = src.len();
    let half = kernel.len() / 2;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = bias;
        for (j, &w) in kernel.iter().enumerate() {
            let idx = i + j;
            if idx >= half && idx - half < n {
                acc += w * src[idx - half];
            }
        }
        *o = acc;
    }
}

/// Number of in-range taps of a same-length convolution.
pub(crate) fn valid_taps(n: usize, kernel: usize) -> usize {
    let half = kernel / 2;
    (0..n)
        .map(|i| {
            (0..kernel)
                .filter(|&j| i + j >= half && i + j - half < n)
                .count()
        })
        .sum()
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|&v| v - max).collect();
    let lse = shifted.iter().map(|v| v.exp()).sum::<f64>().ln();
    shifted.iter().map(|v| v - lse).collect()
}

fn check_input(cfg: &ModelConfig, input: &Matrix) -> Result<()> {
    if input.rows() != cfg.in_channels || input.cols() != cfg.input_len {
        return Err(Error::Shape(format!(
            "expected a {}×{} input, got {}×{}",
            cfg.in_channels,
            cfg.input_len,
            input.rows(),
            input.cols()
        )));
    }
    Ok(())
}

/// Convolutional front end up to (but excluding) the ReLU.
fn conv_stage(
    params: &ModelParams,
    cfg: &ModelConfig,
    input: &Matrix,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = cfg.input_len;
    let width = cfg.branch_width();
    let fused = cfg.fused_channels();
    let w = &params.weights;
    let mut pw_out = Vec::with_capacity(cfg.branches());
    let mut fused_buf = vec![0.0; fused * n];
    for (b, br) in w.branches.iter().enumerate() {
        let mut u = vec![0.0; width * n];
        for t in 0..width {
            let dst = &mut u[t * n..(t + 1) * n];
            if cfg.has_pointwise() {
                let row = &br.pw_w[t * cfg.in_channels..(t + 1) * cfg.in_channels];
                pointwise_channel(row, br.pw_b[t], input, dst);
            } else {
                dst.copy_from_slice(input.row(t));
            }
        }
        let k = cfg.branch_kernel(b);
        for t in 0..width {
            let f = cfg.fused_index(b, t);
            let dst = &mut fused_buf[f * n..(f + 1) * n];
            if cfg.has_depthwise() {
                conv_channel(
                    &br.dw_w[t * k..(t + 1) * k],
                    br.dw_b[t],
                    &u[t * n..(t + 1) * n],
                    dst,
                );
            } else {
                dst.copy_from_slice(&u[t * n..(t + 1) * n]);
            }
        }
        pw_out.push(u);
    }
    let mut pre_relu = fused_buf.clone();
    for f in 0..cfg.partial_channels() {
        conv_channel(
            &w.fusion_w[f * FUSION_KERNEL..(f + 1) * FUSION_KERNEL],
            w.fusion_b[f],
            &fused_buf[f * n..(f + 1) * n],
            &mut pre_relu[f * n..(f + 1) * n],
        );
    }
    (pw_out, fused_buf, pre_relu)
}

fn head(params: &ModelParams, cfg: &ModelConfig, pooled: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = &params.weights;
    let fused = cfg.fused_channels();
    let (hidden_pre, hidden) = if cfg.has_hidden() {
        let pre: Vec<f64> = (0..cfg.hidden)
            .map(|j| {
                let row = &w.fc1_w[j * fused..(j + 1) * fused];
                row.iter().zip(pooled).map(|(a, b)| a * b).sum::<f64>() + w.fc1_b[j]
            })
            .collect();
        let act = pre.iter().map(|&v| v.max(0.0)).collect();
        (pre, act)
    } else {
        (Vec::new(), Vec::new())
    };
    let feats: &[f64] = if cfg.has_hidden() { &hidden } else { pooled };
    let head_in = cfg.head_inputs();
    let logits: Vec<f64> = (0..cfg.n_classes)
        .map(|c| {
            let row = &w.fc2_w[c * head_in..(c + 1) * head_in];
            row.iter().zip(feats).map(|(a, b)| a * b).sum::<f64>() + w.fc2_b[c]
        })
        .collect();
    (hidden_pre, hidden, log_softmax(&logits))
}

/// Batch forward pass. In [`Mode::Train`] BatchNorm statistics are taken
/// over every item and position of the batch.
pub fn forward_batch(
    params: &ModelParams,
    cfg: &ModelConfig,
    inputs: &[&Matrix],
    mode: Mode,
) -> Result<ForwardCache> {
    params.check(cfg)?;
    if inputs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    for x in inputs {
        check_input(cfg, x)?;
    }
    let n = cfg.input_len;
    let fused = cfg.fused_channels();
    let fronts: Vec<_> = inputs.iter().map(|x| conv_stage(params, cfg, x)).collect();

    let (bn_mean, bn_var) = match mode {
        Mode::Train => {
            let count = (inputs.len() * n) as f64;
            let mut mean = vec![0.0; fused];
            let mut var = vec![0.0; fused];
            for f in 0..fused {
                let relu = || {
                    fronts.iter().flat_map(move |(_, _, pre)| {
                        pre[f * n..(f + 1) * n].iter().map(|v| v.max(0.0))
                    })
                };
                let m = relu().sum::<f64>() / count;
                mean[f] = m;
                var[f] = relu().map(|v| (v - m) * (v - m)).sum::<f64>() / count;
            }
            (mean, var)
        }
        Mode::Infer => (
            params.bn_running_mean.clone(),
            params.bn_running_var.clone(),
        ),
    };

    let w = &params.weights;
    let items = inputs
        .iter()
        .zip(fronts)
        .map(|(x, (pw_out, fused_buf, pre_relu))| {
            let mut normed = vec![0.0; fused * n];
            let mut pooled = vec![0.0; fused];
            for f in 0..fused {
                let std = (bn_var[f] + BN_EPS).sqrt();
                let mut sum = 0.0;
                for i in 0..n {
                    let a = pre_relu[f * n + i].max(0.0);
                    let xhat = (a - bn_mean[f]) / std;
                    normed[f * n + i] = xhat;
                    sum += w.bn_gamma[f] * xhat + w.bn_beta[f];
                }
                pooled[f] = sum / n as f64;
            }
            let (hidden_pre, hidden, log_probs) = head(params, cfg, &pooled);
            ItemCache {
                input: (*x).clone(),
                pw_out,
                fused: fused_buf,
                pre_relu,
                normed,
                pooled,
                hidden_pre,
                hidden,
                log_probs,
            }
        })
        .collect();

    Ok(ForwardCache {
        mode,
        items,
        bn_mean,
        bn_var,
        n,
    })
}

/// Forward pass of a single input; returns log-probabilities and the cache.
pub fn forward(
    params: &ModelParams,
    cfg: &ModelConfig,
    input: &Matrix,
    mode: Mode,
) -> Result<(Vec<f64>, ForwardCache)> {
    let cache = forward_batch(params, cfg, &[input], mode)?;
    let logits = cache.items[0].log_probs.clone();
    Ok((logits, cache))
}

/// Inference-mode forward pass for one input.
///
/// With `skip_masked` every multiply-accumulate that belongs to a masked
/// channel or neuron is skipped; otherwise all work is done. Because masked
/// weights are exactly zero the two routes give bit-identical results. The
/// return value carries the number of floating point operations performed
/// (a multiply-add counts as 2).
pub fn infer_counted(
    params: &ModelParams,
    cfg: &ModelConfig,
    input: &Matrix,
    skip_masked: bool,
) -> Result<(Vec<f64>, u64)> {
    check_input(cfg, input)?;
    let n = cfg.input_len;
    let width = cfg.branch_width();
    let fused = cfg.fused_channels();
    let partial = cfg.partial_channels();
    let w = &params.weights;
    let live = |f: usize| !skip_masked || params.channel_mask[f];
    let kept: Vec<usize> = (0..fused).filter(|&f| live(f)).collect();
    let kept_neurons: Vec<usize> = (0..cfg.hidden_neurons())
        .filter(|&j| !skip_masked || params.neuron_mask[j])
        .collect();
    let mut flops = 0u64;

    let mut u = vec![0.0; n];
    let mut fused_buf = vec![0.0; fused * n];
    for (b, br) in w.branches.iter().enumerate() {
        let k = cfg.branch_kernel(b);
        for t in 0..width {
            let f = cfg.fused_index(b, t);
            if !live(f) {
                continue;
            }
            if cfg.has_pointwise() {
                let row = &br.pw_w[t * cfg.in_channels..(t + 1) * cfg.in_channels];
                pointwise_channel(row, br.pw_b[t], input, &mut u);
                flops += (n * (2 * cfg.in_channels + 1)) as u64;
            } else {
                u.copy_from_slice(input.row(t));
            }
            let dst = &mut fused_buf[f * n..(f + 1) * n];
            if cfg.has_depthwise() {
                conv_channel(&br.dw_w[t * k..(t + 1) * k], br.dw_b[t], &u, dst);
                flops += (2 * valid_taps(n, k) + n) as u64;
            } else {
                dst.copy_from_slice(&u);
            }
        }
    }

    let mut act = vec![0.0; n];
    let mut pooled = vec![0.0; fused];
    for &f in &kept {
        let src = &fused_buf[f * n..(f + 1) * n];
        if f < partial {
            conv_channel(
                &w.fusion_w[f * FUSION_KERNEL..(f + 1) * FUSION_KERNEL],
                w.fusion_b[f],
                src,
                &mut act,
            );
            flops += (2 * valid_taps(n, FUSION_KERNEL) + n) as u64;
        } else {
            act.copy_from_slice(src);
        }
        let mean = params.bn_running_mean[f];
        let std = (params.bn_running_var[f] + BN_EPS).sqrt();
        let mut sum = 0.0;
        for &a in &act {
            let xhat = (a.max(0.0) - mean) / std;
            sum += w.bn_gamma[f] * xhat + w.bn_beta[f];
        }
        pooled[f] = sum / n as f64;
        // BatchNorm: subtract, divide, multiply, add; pooling: n - 1 adds and a divide.
        flops += (4 * n + n) as u64;
    }

    let head_in = cfg.head_inputs();
    let mut hidden = vec![0.0; cfg.hidden_neurons()];
    for &j in &kept_neurons {
        let row = &w.fc1_w[j * fused..(j + 1) * fused];
        let mut acc = 0.0;
        for &f in &kept {
            acc += row[f] * pooled[f];
        }
        hidden[j] = (acc + w.fc1_b[j]).max(0.0);
        flops += (2 * kept.len() + 1) as u64;
    }
    let (feats, idx) = if cfg.has_hidden() {
        (&hidden, &kept_neurons)
    } else {
        (&pooled, &kept)
    };
    let mut logits = vec![0.0; cfg.n_classes];
    for (c, l) in logits.iter_mut().enumerate() {
        let row = &w.fc2_w[c * head_in..(c + 1) * head_in];
        let mut acc = 0.0;
        for &i in idx {
            acc += row[i] * feats[i];
        }
        flops += (2 * idx.len() + 1) as u64;
        *l = acc + w.fc2_b[c];
    }
    flops += 4 * cfg.n_classes as u64;
    Ok((log_softmax(&logits), flops))
}

/// Dense inference-mode forward pass.
pub fn infer(params: &ModelParams, cfg: &ModelConfig, input: &Matrix) -> Result<Vec<f64>> {
    infer_counted(params, cfg, input, false).map(|(l, _)| l)
}
