//! End-to-end composition: window → graph input → model, plus LOSO training
//! and evaluation driven by one declarative configuration.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{
    compare_latency, compute_metrics, count_mflops, mean_metrics, AblationRow, BenchReport,
    FoldRow, LatencyStats, PerformanceMetrics, ResourceReport,
};
use crate::data::{loso_splits, Dataset, DatasetFormat};
use crate::graph::{
    aggregate_nodes, augment, build_bdsag, DEFAULT_GLOBAL_RATIO, DEFAULT_K, DEFAULT_LOCAL_RATIO,
};
use crate::model::checkpoint::Checkpoint;
use crate::model::Variant;
use crate::model::{argmax, infer, train, History, ModelConfig, ModelParams, TrainConfig};
use crate::pruning::PruneConfig;
use crate::pruning::{prune, PruneReport};
use crate::signal::{
    compute_bdst, decompose_bands_on, to_frequency, BandEdges, BandGrid, EegWindow, Label, Wavelet,
};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    /// Inferred from the file extension when absent.
    pub format: Option<DatasetFormat>,
    /// Electrode kept for classification.
    pub channel: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            format: None,
            channel: crate::data::SINGLE_CHANNEL.to_string(),
        }
    }
}

impl DatasetConfig {
    pub fn resolved_format(&self, path: &Path) -> DatasetFormat {
        self.format
            .unwrap_or_else(|| DatasetFormat::from_path(path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub wavelet: Wavelet,
    pub band_edges: BandEdges,
    pub band_grid: BandGrid,
    /// Band half-width of the adjacency graph.
    pub k: usize,
    /// Node ratio of the global view.
    pub global_ratio: f64,
    /// Node ratio of the local view.
    pub local_ratio: f64,
    /// Seed of the sampled views. Training window `i` uses
    /// `augment_seed + 2·i`; inference always uses `augment_seed`.
    pub augment_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub prune: PruneConfig,
    pub dataset: DatasetConfig,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            wavelet: Wavelet::Db4,
            band_edges: BandEdges::default(),
            band_grid: BandGrid::default(),
            k: DEFAULT_K,
            global_ratio: DEFAULT_GLOBAL_RATIO,
            local_ratio: DEFAULT_LOCAL_RATIO,
            augment_seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            prune: PruneConfig::default(),
            dataset: DatasetConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.band_edges.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.prune.validate()?;
        let n = self.model.input_len;
        if self.k < 1 || self.k + 1 > n {
            return Err(Error::OutOfRange {
                name: "k",
                value: self.k as f64,
                range: "[1, input_len - 1]",
            });
        }
        if !(0.5..=1.0).contains(&self.global_ratio) {
            return Err(Error::OutOfRange {
                name: "global_ratio",
                value: self.global_ratio,
                range: "[0.5, 1]",
            });
        }
        if !(self.local_ratio > 0.0 && self.local_ratio <= 0.5) {
            return Err(Error::OutOfRange {
                name: "local_ratio",
                value: self.local_ratio,
                range: "(0, 0.5]",
            });
        }
        if self.model.in_channels != 3 {
            return Err(Error::InvalidConfig(
                "the graph input has 3 channels (graph, global view, local view); set in_channels = 3".into(),
            ));
        }
        Ok(())
    }

    /// Parses TOML, rejecting unknown keys, and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Format {
            what: "configuration",
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Signal → bands → graph → views → aggregated 3×n model input.
pub fn window_to_input(window: &EegWindow, pc: &PipelineConfig, seed: u64) -> Result<Matrix> {
    let freq = to_frequency(window, pc.wavelet)?;
    let bands = decompose_bands_on(&freq, window.sample_rate(), &pc.band_edges, pc.band_grid)?;
    let bdst = compute_bdst(&bands);
    let graph = build_bdsag(&freq, &bdst, pc.k)?;
    let aug = augment(&graph, pc.global_ratio, pc.local_ratio, seed)?;
    Ok(aggregate_nodes(&aug))
}

/// Augmentation seed for training window `index`.
pub fn training_seed(pc: &PipelineConfig, index: usize) -> u64 {
    pc.augment_seed.wrapping_add(2 * index as u64)
}

/// Model inputs for every window, in parallel. `training` selects the
/// per-window seeds, otherwise the fixed inference seed is used.
pub fn prepare_inputs(
    windows: &[EegWindow],
    pc: &PipelineConfig,
    training: bool,
) -> Result<Vec<Matrix>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let seed = if training {
                training_seed(pc, i)
            } else {
                pc.augment_seed
            };
            window_to_input(w, pc, seed).map_err(|e| Error::Window {
                index: i,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// Predicted label and class probabilities; ties go to Alert.
pub fn predict(
    params: &ModelParams,
    cfg: &ModelConfig,
    window: &EegWindow,
    pc: &PipelineConfig,
) -> Result<(Label, Vec<f64>)> {
    let input = window_to_input(window, pc, pc.augment_seed)?;
    classify(params, cfg, &input)
}

pub fn classify(
    params: &ModelParams,
    cfg: &ModelConfig,
    input: &Matrix,
) -> Result<(Label, Vec<f64>)> {
    let log_probs = infer(params, cfg, input)?;
    let label = Label::from_index(argmax(&log_probs))?;
    Ok((label, log_probs.iter().map(|v| v.exp()).collect()))
}

fn labelled(windows: &[EegWindow]) -> Result<Vec<Label>> {
    windows
        .iter()
        .enumerate()
        .map(|(index, w)| {
            w.label.ok_or(Error::Window {
                index,
                detail: "training and evaluation need labelled windows".into(),
            })
        })
        .collect()
}

/// Trains on labelled windows with per-window augmentation seeds.
pub fn train_windows(windows: &[EegWindow], pc: &PipelineConfig) -> Result<(ModelParams, History)> {
    pc.validate()?;
    let labels = labelled(windows)?;
    let inputs = prepare_inputs(windows, pc, true)?;
    let set: Vec<(Matrix, Label)> = inputs.into_iter().zip(labels).collect();
    train(&set, &pc.model, &pc.train)
}

/// Predictions and metrics on labelled windows.
pub fn evaluate_windows(
    params: &ModelParams,
    cfg: &ModelConfig,
    windows: &[EegWindow],
    pc: &PipelineConfig,
) -> Result<(Vec<Label>, PerformanceMetrics)> {
    let truth = labelled(windows)?;
    let inputs = prepare_inputs(windows, pc, false)?;
    evaluate_inputs(params, cfg, &inputs, &truth)
}

pub fn evaluate_inputs(
    params: &ModelParams,
    cfg: &ModelConfig,
    inputs: &[Matrix],
    truth: &[Label],
) -> Result<(Vec<Label>, PerformanceMetrics)> {
    let predicted = inputs
        .iter()
        .map(|x| classify(params, cfg, x).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    let metrics = compute_metrics(&predicted, truth)?;
    Ok((predicted, metrics))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub subject: u16,
    pub params: ModelParams,
    pub history: History,
    pub predicted: Vec<Label>,
    pub truth: Vec<Label>,
    pub metrics: PerformanceMetrics,
}

/// Leave-one-subject-out training and evaluation of a single-channel
/// dataset. Folds run on a pool of at most `threads` workers (all cores when
/// `None`); results are returned in subject order and do not depend on the
/// thread count.
pub fn run_loso(
    dataset: &Dataset,
    pc: &PipelineConfig,
    threads: Option<usize>,
) -> Result<Vec<FoldOutcome>> {
    pc.validate()?;
    let windows = dataset.windows()?;
    if dataset.window_len != pc.model.input_len {
        return Err(Error::InvalidConfig(format!(
            "model input_len {} does not match the dataset window length {}",
            pc.model.input_len, dataset.window_len
        )));
    }
    let folds = loso_splits(dataset)?;
    let run_fold = |fold: &crate::data::Fold| -> Result<FoldOutcome> {
        let pick = |idx: &[usize]| idx.iter().map(|&i| windows[i].clone()).collect::<Vec<_>>();
        let (train_w, test_w) = (pick(&fold.train), pick(&fold.test));
        let (params, history) = train_windows(&train_w, pc)?;
        let truth = labelled(&test_w)?;
        let (predicted, metrics) = evaluate_windows(&params, &pc.model, &test_w, pc)?;
        Ok(FoldOutcome {
            subject: fold.subject,
            params,
            history,
            predicted,
            truth,
            metrics,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| folds.par_iter().map(run_fold).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    /// Timed inferences per latency measurement.
    pub latency_reps: usize,
    /// Also run every ablation variant through the same protocol.
    pub ablations: bool,
    pub threads: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            latency_reps: 1000,
            ablations: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: BenchReport,
    pub folds: Vec<FoldOutcome>,
    pub pruned: Vec<(ModelParams, PruneReport)>,
}

fn resource(params: &ModelParams, pc: &PipelineConfig, latency_ms: LatencyStats) -> ResourceReport {
    let cfg = &pc.model;
    ResourceReport {
        footprint_bytes: Checkpoint::from_params(cfg, params).to_bytes().len() as u64,
        mflops: count_mflops(cfg, &params.channel_mask, &params.neuron_mask, pc.k),
        latency_ms,
        power_w: None,
        energy_mj: None,
    }
}

/// Full benchmark: LOSO performance of the configured model, its pruned
/// counterpart, resource figures measured on the first fold's model and its
/// held-out inputs, and optionally one LOSO row per ablation variant.
pub fn run_bench(
    dataset: &Dataset,
    pc: &PipelineConfig,
    opts: &BenchOptions,
) -> Result<BenchOutcome> {
    let folds = run_loso(dataset, pc, opts.threads)?;
    let fold_rows: Vec<FoldRow> = folds
        .iter()
        .map(|f| FoldRow {
            subject: f.subject,
            metrics: f.metrics,
        })
        .collect();
    let performance = mean_metrics(&fold_rows.iter().map(|r| r.metrics).collect::<Vec<_>>())
        .expect("at least two folds");

    let windows = dataset.windows()?;
    let split = loso_splits(dataset)?;
    let mut pruned = Vec::with_capacity(folds.len());
    let mut pruned_metrics = Vec::with_capacity(folds.len());
    for (fold, outcome) in split.iter().zip(&folds) {
        let test: Vec<EegWindow> = fold.test.iter().map(|&i| windows[i].clone()).collect();
        let (p, rep) = prune(&outcome.params, &pc.model, &pc.prune)?;
        pruned_metrics.push(evaluate_windows(&p, &pc.model, &test, pc)?.1);
        pruned.push((p, rep));
    }

    let first_test: Vec<EegWindow> = split[0].test.iter().map(|&i| windows[i].clone()).collect();
    let inputs = prepare_inputs(&first_test, pc, false)?;
    let (dense_lat, sparse_lat) = compare_latency(
        &folds[0].params,
        &pruned[0].0,
        &pc.model,
        &inputs,
        opts.latency_reps,
    )?;
    let dense = resource(&folds[0].params, pc, dense_lat);
    let sparse = resource(&pruned[0].0, pc, sparse_lat);
    let mut prune_report = pruned[0].1.clone();
    prune_report.latency_before_ms = Some(dense.latency_ms.median_ms);
    prune_report.latency_after_ms = Some(sparse.latency_ms.median_ms);

    let mut ablations = vec![ablation_row(pc, &folds[0].params, performance)];
    if opts.ablations {
        for variant in Variant::ABLATIONS {
            let mut vpc = pc.clone();
            vpc.model.variant = variant;
            let vf = run_loso(dataset, &vpc, opts.threads)?;
            let perf = mean_metrics(&vf.iter().map(|f| f.metrics).collect::<Vec<_>>())
                .expect("at least two folds");
            ablations.push(ablation_row(&vpc, &vf[0].params, perf));
        }
    }

    let report = BenchReport {
        performance,
        resource: dense,
        pruned_performance: mean_metrics(&pruned_metrics),
        pruned_resource: Some(sparse),
        prune: Some(prune_report),
        folds: fold_rows,
        ablations,
        protocol: "LOSO".into(),
        seed: pc.train.seed,
        config_hash: pc.hash(),
    };
    Ok(BenchOutcome {
        report,
        folds,
        pruned,
    })
}

fn ablation_row(
    pc: &PipelineConfig,
    params: &ModelParams,
    performance: PerformanceMetrics,
) -> AblationRow {
    AblationRow {
        variant: pc.model.variant,
        label: pc.model.variant.label().to_string(),
        performance,
        mflops: count_mflops(&pc.model, &params.channel_mask, &params.neuron_mask, pc.k),
        parameters: params.weights.len(),
    }
}

/// Thread cap from the `LDGCN_THREADS` environment variable.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("LDGCN_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid(format!(
                "LDGCN_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}
