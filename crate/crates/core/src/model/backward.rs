//! Gradients of the mean negative log-likelihood over a batch.

use super::config::{ModelConfig, BN_EPS, FUSION_KERNEL};
use super::forward::{ForwardCache, Mode};
use super::params::{zero_masked, Gradients, ModelParams, Weights};
use crate::error::{Error, Result};
use crate::signal::Label;

/// Negative log-likelihood of `label` under log-probabilities `logits`.
pub fn nll_loss(logits: &[f64], label: usize) -> Result<f64> {
    logits.get(label).map(|&l| -l).ok_or(Error::Label(label))
}

/// Accumulates `src` (same-length zero-padded convolution input) against the
/// output gradient `dout` into the kernel, bias and input gradients.
fn conv_backward(
    kernel: &[f64],
    src: &[f64],
    dout: &[f64],
    dkernel: &mut [f64],
    dbias: &mut f64,
    dsrc: &mut [f64],
) {
    let n = src.len();
    let half = kernel.len() / 2;
    for (i, &g) in dout.iter().enumerate() {
        *dbias += g;
        for (j, &w) in kernel.iter().enumerate() {
            let idx = i + j;
            if idx >= half && idx - half < n {
                dkernel[j] += g * src[idx - half];
                dsrc[idx - half] += g * w;
            }
        }
    }
}

/// Backward pass for a training-mode [`ForwardCache`].
///
/// The loss is the batch mean of [`nll_loss`]. Gradients of masked values are
/// forced to zero.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    cache: &ForwardCache,
    labels: &[Label],
) -> Result<Gradients> {
    params.check(cfg)?;
    if cache.mode != Mode::Train {
        return Err(Error::Shape("backward needs a training-mode cache".into()));
    }
    if labels.len() != cache.items.len() {
        return Err(Error::LengthMismatch {
            expected: cache.items.len(),
            actual: labels.len(),
        });
    }
    let n = cfg.input_len;
    let fused = cfg.fused_channels();
    if cache.n != n || cache.bn_mean.len() != fused {
        return Err(Error::Shape(
            "cache does not match the model configuration".into(),
        ));
    }
    let width = cfg.branch_width();
    let partial = cfg.partial_channels();
    let head_in = cfg.head_inputs();
    let batch = cache.items.len() as f64;
    let w = &params.weights;
    let mut g = Weights::zeros(cfg);

    // Per item gradient w.r.t. the BatchNorm output, flattened as fused × n.
    let mut d_normed_all = Vec::with_capacity(cache.items.len());
    for (item, label) in cache.items.iter().zip(labels) {
        let label = label.index();
        if label >= cfg.n_classes {
            return Err(Error::Label(label));
        }
        let dlogits: Vec<f64> = item
            .log_probs
            .iter()
            .enumerate()
            .map(|(c, &lp)| (lp.exp() - if c == label { 1.0 } else { 0.0 }) / batch)
            .collect();

        let feats: &[f64] = if cfg.has_hidden() {
            &item.hidden
        } else {
            &item.pooled
        };
        let mut dfeats = vec![0.0; head_in];
        for (c, &dl) in dlogits.iter().enumerate() {
            g.fc2_b[c] += dl;
            let row = &w.fc2_w[c * head_in..(c + 1) * head_in];
            let grow = &mut g.fc2_w[c * head_in..(c + 1) * head_in];
            for k in 0..head_in {
                grow[k] += dl * feats[k];
                dfeats[k] += dl * row[k];
            }
        }

        let dpooled = if cfg.has_hidden() {
            let mut dp = vec![0.0; fused];
            for j in 0..cfg.hidden {
                if item.hidden_pre[j] <= 0.0 {
                    continue;
                }
                let dh = dfeats[j];
                g.fc1_b[j] += dh;
                let row = &w.fc1_w[j * fused..(j + 1) * fused];
                let grow = &mut g.fc1_w[j * fused..(j + 1) * fused];
                for f in 0..fused {
                    grow[f] += dh * item.pooled[f];
                    dp[f] += dh * row[f];
                }
            }
            dp
        } else {
            dfeats
        };

        // Average pooling spreads the gradient evenly; fold in the affine step.
        let mut d_normed = vec![0.0; fused * n];
        for f in 0..fused {
            let dy = dpooled[f] / n as f64;
            let xs = &item.normed[f * n..(f + 1) * n];
            g.bn_beta[f] += dy * n as f64;
            g.bn_gamma[f] += dy * xs.iter().sum::<f64>();
            d_normed[f * n..(f + 1) * n].fill(dy * w.bn_gamma[f]);
        }
        d_normed_all.push(d_normed);
    }

    // BatchNorm statistics couple every item and position of a channel.
    let count = batch * n as f64;
    let mut sum_d = vec![0.0; fused];
    let mut sum_dx = vec![0.0; fused];
    for (item, d_normed) in cache.items.iter().zip(&d_normed_all) {
        for f in 0..fused {
            for i in 0..n {
                let d = d_normed[f * n + i];
                sum_d[f] += d;
                sum_dx[f] += d * item.normed[f * n + i];
            }
        }
    }

    for (item, d_normed) in cache.items.iter().zip(&d_normed_all) {
        // Gradient w.r.t. the partial convolution output (pre-ReLU).
        let mut d_pre = vec![0.0; fused * n];
        for f in 0..fused {
            let std = (cache.bn_var[f] + BN_EPS).sqrt();
            for i in 0..n {
                let k = f * n + i;
                if item.pre_relu[k] > 0.0 {
                    let xhat = item.normed[k];
                    d_pre[k] = (d_normed[k] - sum_d[f] / count - xhat * sum_dx[f] / count) / std;
                }
            }
        }

        let mut d_fused = d_pre.clone();
        for f in 0..partial {
            let range = f * n..(f + 1) * n;
            d_fused[range.clone()].fill(0.0);
            let mut dbias = 0.0;
            conv_backward(
                &w.fusion_w[f * FUSION_KERNEL..(f + 1) * FUSION_KERNEL],
                &item.fused[range.clone()],
                &d_pre[range.clone()],
                &mut g.fusion_w[f * FUSION_KERNEL..(f + 1) * FUSION_KERNEL],
                &mut dbias,
                &mut d_fused[range],
            );
            g.fusion_b[f] += dbias;
        }

        for (b, br) in w.branches.iter().enumerate() {
            let k = cfg.branch_kernel(b);
            let u = &item.pw_out[b];
            let gb = &mut g.branches[b];
            for t in 0..width {
                let f = cfg.fused_index(b, t);
                let d_v = &d_fused[f * n..(f + 1) * n];
                let mut d_u = vec![0.0; n];
                if cfg.has_depthwise() {
                    conv_backward(
                        &br.dw_w[t * k..(t + 1) * k],
                        &u[t * n..(t + 1) * n],
                        d_v,
                        &mut gb.dw_w[t * k..(t + 1) * k],
                        &mut gb.dw_b[t],
                        &mut d_u,
                    );
                } else {
                    d_u.copy_from_slice(d_v);
                }
                if cfg.has_pointwise() {
                    let grow = &mut gb.pw_w[t * cfg.in_channels..(t + 1) * cfg.in_channels];
                    for (c, gw) in grow.iter_mut().enumerate() {
                        *gw += d_u
                            .iter()
                            .zip(item.input.row(c))
                            .map(|(a, x)| a * x)
                            .sum::<f64>();
                    }
                    gb.pw_b[t] += d_u.iter().sum::<f64>();
                }
            }
        }
    }

    zero_masked(&mut g, &params.keep_map(cfg));
    Ok(g)
}
