//! Classification metrics and resource accounting.
//!
//! FLOPs follow one convention throughout: a multiply-add is 2 FLOPs, every
//! other arithmetic operation is 1, and ReLU/max operations are free.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{infer_counted, ModelConfig, ModelParams, Variant, FUSION_KERNEL};
use crate::pruning::PruneReport;
use crate::signal::Label;
use crate::{Error, Matrix, Result};

/// Drowsiness is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn compute_metrics(predicted: &[Label], truth: &[Label]) -> Result<PerformanceMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (Label::Drowsiness, Label::Drowsiness) => tp += 1,
            (Label::Alert, Label::Alert) => tn += 1,
            (Label::Drowsiness, Label::Alert) => fp += 1,
            (Label::Alert, Label::Drowsiness) => fneg += 1,
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio(tp + tn, truth.len());
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let specificity = ratio(tn, tn + fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(PerformanceMetrics {
        accuracy,
        precision,
        recall,
        specificity,
        f1,
        degenerate,
    })
}

/// Field-wise mean; degenerate if any input is.
pub fn mean_metrics(all: &[PerformanceMetrics]) -> Option<PerformanceMetrics> {
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    let avg = |f: fn(&PerformanceMetrics) -> f64| all.iter().map(f).sum::<f64>() / n;
    Some(PerformanceMetrics {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        specificity: avg(|m| m.specificity),
        f1: avg(|m| m.f1),
        degenerate: all.iter().any(|m| m.degenerate),
    })
}

/// Positions where a same-length zero-padded convolution of width `k` reads
/// inside the signal, summed over all outputs.
fn valid_taps(n: usize, k: usize) -> usize {
    let half = k / 2;
    (0..n)
        .map(|i| {
            (0..k)
                .filter(|&j| i + j >= half && i + j - half < n)
                .count()
        })
        .sum()
}

/// FLOPs of one inference through the network, skipping masked units.
pub fn model_flops(cfg: &ModelConfig, channel_mask: &[bool], neuron_mask: &[bool]) -> u64 {
    let n = cfg.input_len;
    let mut total = 0usize;
    let kept_channels: Vec<usize> = (0..cfg.fused_channels())
        .filter(|&f| channel_mask[f])
        .collect();
    for &f in &kept_channels {
        let (b, _) = cfg.split_channel(f);
        if cfg.has_pointwise() {
            total += n * (2 * cfg.in_channels + 1);
        }
        if cfg.has_depthwise() {
            total += 2 * valid_taps(n, cfg.branch_kernel(b)) + n;
        }
        if f < cfg.partial_channels() {
            total += 2 * valid_taps(n, FUSION_KERNEL) + n;
        }
        // BatchNorm (4 per value) and average pooling (n per channel).
        total += 5 * n;
    }
    let kc = kept_channels.len();
    if cfg.has_hidden() {
        let kept_neurons = neuron_mask.iter().filter(|&&m| m).count();
        total += kept_neurons * (2 * kc + 1);
        total += cfg.n_classes * (2 * kept_neurons + 1);
    } else {
        total += cfg.n_classes * (2 * kc + 1);
    }
    total += 4 * cfg.n_classes;
    total as u64
}

/// FLOPs of degree-normalised aggregation over the three graph channels,
/// with every node live: `2·deg + 1` per node per channel.
pub fn aggregation_flops(n: usize, band_k: usize) -> u64 {
    let k = band_k.min(n.saturating_sub(1));
    let per_channel: usize = (0..n)
        .map(|i| 2 * (1 + i.min(k) + (n - 1 - i).min(k)) + 1)
        .sum();
    3 * per_channel as u64
}

/// Millions of FLOPs per inference, aggregation included.
pub fn count_mflops(
    cfg: &ModelConfig,
    channel_mask: &[bool],
    neuron_mask: &[bool],
    band_k: usize,
) -> f64 {
    (model_flops(cfg, channel_mask, neuron_mask) + aggregation_flops(cfg.input_len, band_k)) as f64
        / 1e6
}

pub const MIN_LATENCY_REPS: usize = 100;
pub const WARMUP_RUNS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub reps: usize,
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_LATENCY_REPS {
        return Err(Error::OutOfRange {
            name: "reps",
            value: reps as f64,
            range: "[100, inf)",
        });
    }
    Ok(())
}

fn stats(mut samples: Vec<Duration>) -> LatencyStats {
    let reps = samples.len();
    samples.sort_unstable();
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let median = if reps % 2 == 1 {
        ms(samples[reps / 2])
    } else {
        (ms(samples[reps / 2 - 1]) + ms(samples[reps / 2])) / 2.0
    };
    let p95 = ms(samples[((reps as f64 * 0.95).ceil() as usize).clamp(1, reps) - 1]);
    LatencyStats {
        median_ms: median,
        p95_ms: p95,
        reps,
    }
}

/// Times `reps` calls of `run` after [`WARMUP_RUNS`] untimed calls, on the
/// calling thread. The caller must not run other work concurrently.
pub fn time_runs<F: FnMut(usize) -> Result<()>>(reps: usize, mut run: F) -> Result<LatencyStats> {
    check_reps(reps)?;
    for i in 0..WARMUP_RUNS {
        run(i)?;
    }
    let mut samples = Vec::with_capacity(reps);
    for i in 0..reps {
        let start = Instant::now();
        run(i)?;
        samples.push(start.elapsed());
    }
    Ok(stats(samples))
}

/// As [`time_runs`] for two workloads, alternating one call of each so that
/// both see the same machine conditions.
pub fn time_paired<A, B>(reps: usize, mut a: A, mut b: B) -> Result<(LatencyStats, LatencyStats)>
where
    A: FnMut(usize) -> Result<()>,
    B: FnMut(usize) -> Result<()>,
{
    check_reps(reps)?;
    for i in 0..WARMUP_RUNS {
        a(i)?;
        b(i)?;
    }
    let mut sa = Vec::with_capacity(reps);
    let mut sb = Vec::with_capacity(reps);
    for i in 0..reps {
        let start = Instant::now();
        a(i)?;
        sa.push(start.elapsed());
        let start = Instant::now();
        b(i)?;
        sb.push(start.elapsed());
    }
    Ok((stats(sa), stats(sb)))
}

fn need_inputs(inputs: &[Matrix]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid(
            "latency measurement needs at least one input",
        ));
    }
    Ok(())
}

/// Per-inference latency cycling through `inputs`. With `sparse` the
/// masked-work-skipping route is timed, otherwise the dense one.
pub fn measure_latency(
    params: &ModelParams,
    cfg: &ModelConfig,
    inputs: &[Matrix],
    reps: usize,
    sparse: bool,
) -> Result<LatencyStats> {
    need_inputs(inputs)?;
    time_runs(reps, |i| {
        let out = infer_counted(params, cfg, &inputs[i % inputs.len()], sparse)?;
        std::hint::black_box(out);
        Ok(())
    })
}

/// Dense latency of `dense` against sparse latency of `pruned`, measured
/// with interleaved runs on the same inputs.
pub fn compare_latency(
    dense: &ModelParams,
    pruned: &ModelParams,
    cfg: &ModelConfig,
    inputs: &[Matrix],
    reps: usize,
) -> Result<(LatencyStats, LatencyStats)> {
    need_inputs(inputs)?;
    let run = |params: &ModelParams, sparse: bool, i: usize| -> Result<()> {
        let out = infer_counted(params, cfg, &inputs[i % inputs.len()], sparse)?;
        std::hint::black_box(out);
        Ok(())
    };
    time_paired(reps, |i| run(dense, false, i), |i| run(pruned, true, i))
}

/// Size in bytes of a serialized checkpoint.
pub fn footprint(path: &Path) -> Result<u64> {
    Ok(std::fs::metadata(path)
        .map_err(|e| Error::io(path, e))?
        .len())
}

mod unsupported {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("unsupported"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Num(x) => Some(x),
            Raw::Text(t) if t == "unsupported" => None,
            Raw::Text(t) => {
                return Err(serde::de::Error::custom(format!(
                    "expected a number or \"unsupported\", got `{t}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub footprint_bytes: u64,
    pub mflops: f64,
    pub latency_ms: LatencyStats,
    /// Needs instrumented hardware; serialized as `"unsupported"` when absent.
    #[serde(with = "unsupported")]
    pub power_w: Option<f64>,
    #[serde(with = "unsupported")]
    pub energy_mj: Option<f64>,
}

/// One row of the per-subject table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub subject: u16,
    pub metrics: PerformanceMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub label: String,
    pub performance: PerformanceMetrics,
    pub mflops: f64,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Mean of the per-fold metrics.
    pub performance: PerformanceMetrics,
    pub resource: ResourceReport,
    pub pruned_performance: Option<PerformanceMetrics>,
    pub pruned_resource: Option<ResourceReport>,
    pub prune: Option<PruneReport>,
    pub folds: Vec<FoldRow>,
    pub ablations: Vec<AblationRow>,
    pub protocol: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Per-subject CSV in percent: `ID,Acc,Pre,Spe`, closed by an `Avg` row.
pub fn folds_csv(rows: &[FoldRow]) -> String {
    let mut out = String::from("ID,Acc,Pre,Spe\n");
    let pct = |v: f64| format!("{:.2}", 100.0 * v);
    for r in rows {
        let m = &r.metrics;
        out += &format!(
            "{},{},{},{}\n",
            r.subject,
            pct(m.accuracy),
            pct(m.precision),
            pct(m.specificity)
        );
    }
    let metrics: Vec<_> = rows.iter().map(|r| r.metrics).collect();
    if let Some(m) = mean_metrics(&metrics) {
        out += &format!(
            "Avg,{},{},{}\n",
            pct(m.accuracy),
            pct(m.precision),
            pct(m.specificity)
        );
    }
    out
}
