//! Channel and neuron pruning.
//!
//! Channels are ranked by the L1 norm of the weights that produce them and
//! the weakest are removed. Hidden neurons are ranked by how far their FC1
//! row norm lies from the median norm, and those closest to the median are
//! removed. Pruning zeroes weights in place and records the choice in the
//! masks, so the pruned model keeps its tensor shapes.

use serde::{Deserialize, Serialize};

use crate::model::{infer_counted, ModelConfig, ModelParams};
use crate::{Error, Matrix, Result};

pub const DEFAULT_PR_CHANNEL: f64 = 0.10;
pub const DEFAULT_PR_NEURON: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    /// Fraction of fused channels to remove, in `[0, 1)`.
    pub pr_channel: f64,
    /// Fraction of hidden neurons to remove, in `[0, 1)`.
    pub pr_neuron: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            pr_channel: DEFAULT_PR_CHANNEL,
            pr_neuron: DEFAULT_PR_NEURON,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        check_ratio("pr_channel", self.pr_channel)?;
        check_ratio("pr_neuron", self.pr_neuron)
    }
}

fn check_ratio(name: &'static str, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub pruned_channel_indices: Vec<usize>,
    pub pruned_neuron_indices: Vec<usize>,
    /// Number of weights that were nonzero-able before and are masked now.
    pub pruned_param_count: usize,
    pub latency_before_ms: Option<f64>,
    pub latency_after_ms: Option<f64>,
}

/// `max(1, round(total * ratio))` for a positive ratio, capped at `total`.
pub fn prune_count(total: usize, ratio: f64) -> usize {
    if ratio <= 0.0 || total == 0 {
        0
    } else {
        ((total as f64 * ratio).round() as usize).clamp(1, total)
    }
}

/// Indices of the `count` smallest values, ties broken towards lower index.
pub fn lowest_importance(importance: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(count).collect();
    picked.sort_unstable();
    picked
}

/// Indices of the `count` values closest to the median, ties broken towards
/// lower index. For an even length the median is the mean of the two middle
/// values.
pub fn nearest_median(importance: &[f64], count: usize) -> Vec<usize> {
    if importance.is_empty() {
        return Vec::new();
    }
    let mut sorted = importance.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    };
    let distance: Vec<f64> = importance.iter().map(|v| (v - median).abs()).collect();
    lowest_importance(&distance, count)
}

/// L1 norm of the pointwise row, depthwise kernel and their biases for each
/// fused channel.
pub fn channel_importance(params: &ModelParams, cfg: &ModelConfig) -> Vec<f64> {
    let l1 = |s: &[f64]| s.iter().map(|v| v.abs()).sum::<f64>();
    (0..cfg.fused_channels())
        .map(|f| {
            let (b, t) = cfg.split_channel(f);
            let br = &params.weights.branches[b];
            let mut s = 0.0;
            if cfg.has_pointwise() {
                s +=
                    l1(&br.pw_w[t * cfg.in_channels..(t + 1) * cfg.in_channels]) + br.pw_b[t].abs();
            }
            if cfg.has_depthwise() {
                let k = cfg.branch_kernel(b);
                s += l1(&br.dw_w[t * k..(t + 1) * k]) + br.dw_b[t].abs();
            }
            s
        })
        .collect()
}

/// L1 norm of each FC1 row. Empty when the model has no hidden layer.
pub fn neuron_importance(params: &ModelParams, cfg: &ModelConfig) -> Vec<f64> {
    let fused = cfg.fused_channels();
    (0..cfg.hidden_neurons())
        .map(|j| {
            params.weights.fc1_w[j * fused..(j + 1) * fused]
                .iter()
                .map(|v| v.abs())
                .sum()
        })
        .collect()
}

pub fn select_prune_channels(
    params: &ModelParams,
    cfg: &ModelConfig,
    ratio: f64,
) -> Result<Vec<usize>> {
    check_ratio("pr_channel", ratio)?;
    let imp = channel_importance(params, cfg);
    Ok(lowest_importance(&imp, prune_count(imp.len(), ratio)))
}

pub fn select_prune_neurons(
    params: &ModelParams,
    cfg: &ModelConfig,
    ratio: f64,
) -> Result<Vec<usize>> {
    check_ratio("pr_neuron", ratio)?;
    let imp = neuron_importance(params, cfg);
    Ok(nearest_median(&imp, prune_count(imp.len(), ratio)))
}

/// Masks the given channels and neurons and zeroes every weight attached to
/// them. All other values are left untouched. Latency fields are left empty.
pub fn apply_pruning(
    params: &ModelParams,
    cfg: &ModelConfig,
    channels: &[usize],
    neurons: &[usize],
) -> Result<(ModelParams, PruneReport)> {
    params.check(cfg)?;
    let fused = cfg.fused_channels();
    let hidden = cfg.hidden_neurons();
    if let Some(&bad) = channels.iter().find(|&&c| c >= fused) {
        return Err(Error::invalid(format!(
            "channel index {bad} out of range 0..{fused}"
        )));
    }
    if let Some(&bad) = neurons.iter().find(|&&j| j >= hidden) {
        return Err(Error::invalid(format!(
            "neuron index {bad} out of range 0..{hidden}"
        )));
    }
    let before = params.masked_count(cfg);
    let mut out = params.clone();
    for &c in channels {
        out.channel_mask[c] = false;
    }
    for &j in neurons {
        out.neuron_mask[j] = false;
    }
    out.apply_masks(cfg);
    let after = out.masked_count(cfg);
    let mut pruned_channel_indices = channels.to_vec();
    pruned_channel_indices.sort_unstable();
    pruned_channel_indices.dedup();
    let mut pruned_neuron_indices = neurons.to_vec();
    pruned_neuron_indices.sort_unstable();
    pruned_neuron_indices.dedup();
    Ok((
        out,
        PruneReport {
            pruned_channel_indices,
            pruned_neuron_indices,
            pruned_param_count: after - before,
            latency_before_ms: None,
            latency_after_ms: None,
        },
    ))
}

/// Selects and applies pruning in one step.
pub fn prune(
    params: &ModelParams,
    cfg: &ModelConfig,
    pc: &PruneConfig,
) -> Result<(ModelParams, PruneReport)> {
    pc.validate()?;
    let channels = select_prune_channels(params, cfg, pc.pr_channel)?;
    let neurons = select_prune_neurons(params, cfg, pc.pr_neuron)?;
    apply_pruning(params, cfg, &channels, &neurons)
}

/// Inference that skips all work of masked channels and neurons.
///
/// Returns log-probabilities and the FLOPs performed.
pub fn sparse_forward(
    params: &ModelParams,
    cfg: &ModelConfig,
    input: &Matrix,
) -> Result<(Vec<f64>, u64)> {
    infer_counted(params, cfg, input, true)
}
