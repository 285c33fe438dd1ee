//! Command-line front end.
//!
//! Settings come from built-in defaults, then an optional TOML file, then
//! flags; later sources win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{compare_latency, folds_csv};
use crate::data::{
    load_dataset, save_dataset, select_channel, synth_generate, Dataset, DatasetFormat, SynthConfig,
};
use crate::graph::{build_bdsag, write_graph};
use crate::io::write_atomic;
use crate::model::checkpoint::{load_model, save_model};
use crate::model::{train as train_model, Variant};
use crate::pipeline::{
    predict, prepare_inputs, run_bench, run_loso, threads_from_env, BenchOptions, PipelineConfig,
};
use crate::pruning::{prune, PruneConfig};
use crate::signal::{compute_bdst, decompose_bands_on, to_frequency, Label};
use crate::{Error, Matrix, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ldgcn",
    version,
    about = "EEG drowsiness graphs, classification and pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic labelled dataset.
    Synth(SynthArgs),
    /// Write one adjacency graph file per window of a dataset.
    Preprocess(PreprocessArgs),
    /// Write the adjacency graph of a single window.
    Graph(GraphArgs),
    /// Leave-one-subject-out training; checkpoint and history per fold.
    Train(TrainArgs),
    /// Prune a checkpoint and write a report.
    Prune(PruneArgs),
    /// Classify one window and print the result as JSON.
    Infer(InferArgs),
    /// Performance, resource and ablation report.
    Bench(BenchArgs),
}

/// Flags that override the configuration file.
#[derive(Args, Debug, Default, Clone)]
struct ConfigArgs {
    /// TOML pipeline configuration.
    #[arg(short = 'c', long)]
    config: Option<PathBuf>,
    /// Dataset file (`.csv` for CSV, anything else for the binary format).
    #[arg(short = 'd', long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<DatasetFormat>,
    /// Electrode to classify.
    #[arg(long)]
    channel: Option<String>,
    #[arg(short = 'o', long)]
    output_dir: Option<PathBuf>,
    /// Graph band half-width.
    #[arg(long)]
    k: Option<usize>,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    augment_seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    pr_channel: Option<f64>,
    #[arg(long)]
    pr_neuron: Option<f64>,
}

fn parse_format(s: &str) -> std::result::Result<DatasetFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::ALL
        .into_iter()
        .find(|v| v.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.label()).collect();
            format!("expected one of {}", names.join(", "))
        })
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut pc = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.dataset {
            pc.dataset.path = Some(v.clone());
        }
        if let Some(v) = self.format {
            pc.dataset.format = Some(v);
        }
        if let Some(v) = &self.channel {
            pc.dataset.channel = v.clone();
        }
        if let Some(v) = &self.output_dir {
            pc.output_dir = v.clone();
        }
        if let Some(v) = self.k {
            pc.k = v;
        }
        if let Some(v) = self.seed {
            pc.train.seed = v;
        }
        if let Some(v) = self.augment_seed {
            pc.augment_seed = v;
        }
        if let Some(v) = self.epochs {
            pc.train.epochs = v;
        }
        if let Some(v) = self.lr {
            pc.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            pc.train.batch_size = v;
        }
        if let Some(v) = self.variant {
            pc.model.variant = v;
        }
        if let Some(v) = self.pr_channel {
            pc.prune.pr_channel = v;
        }
        if let Some(v) = self.pr_neuron {
            pc.prune.pr_neuron = v;
        }
        pc.validate()?;
        Ok(pc)
    }
}

/// Loads the configured dataset reduced to the configured channel.
fn load_configured(pc: &PipelineConfig) -> Result<Dataset> {
    let path = pc.dataset.path.as_deref().ok_or_else(|| {
        Error::InvalidConfig("no dataset given (use --dataset or [dataset] path)".into())
    })?;
    let data = load_dataset(path, pc.dataset.resolved_format(path))?;
    select_channel(&data, &pc.dataset.channel)
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Windows per class.
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 3.0)]
    gain: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 1)]
    first_subject: u16,
    #[arg(long, value_parser = parse_format)]
    format: Option<DatasetFormat>,
    #[arg(short = 'o', long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// File holding the window (dataset format, first window unless --index).
    #[arg(short = 'w', long)]
    window: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct PruneArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(short = 'c', long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pr_channel: Option<f64>,
    #[arg(long)]
    pr_neuron: Option<f64>,
    /// Timed inferences for the before/after latency; 0 skips timing.
    #[arg(long, default_value_t = 1000)]
    latency_reps: usize,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(short = 'm', long)]
    model: PathBuf,
    #[arg(short = 'w', long)]
    window: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 1000)]
    latency_reps: usize,
    /// Skip the ablation variants.
    #[arg(long)]
    no_ablations: bool,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Graph(a) => graph(a),
        Command::Train(a) => train(a),
        Command::Prune(a) => prune_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Bench(a) => bench(a),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_per_class: a.per_class,
        seed: a.seed,
        drowsy_band_gain: a.gain,
        noise_std: a.noise_std,
        first_subject: a.first_subject,
        ..SynthConfig::default()
    };
    let data = synth_generate(&cfg)?;
    save_dataset(
        &a.out,
        &data,
        a.format.unwrap_or_else(|| DatasetFormat::from_path(&a.out)),
    )
}

fn window_graph_bytes(data: &Dataset, index: usize, pc: &PipelineConfig) -> Result<Vec<u8>> {
    let w = data.window(index)?;
    let freq = to_frequency(&w, pc.wavelet)?;
    let bands = decompose_bands_on(&freq, w.sample_rate(), &pc.band_edges, pc.band_grid)?;
    let g = build_bdsag(&freq, &compute_bdst(&bands), pc.k)?;
    let mut buf = Vec::new();
    write_graph(&g, &mut buf).map_err(|e| Error::io("<graph>", e))?;
    Ok(buf)
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let pc = a.cfg.resolve()?;
    let data = load_configured(&pc)?;
    let dir = pc.output_dir.join("graphs");
    for i in 0..data.len() {
        let bytes = window_graph_bytes(&data, i, &pc).map_err(|e| Error::Window {
            index: i,
            detail: e.to_string(),
        })?;
        write_atomic(&dir.join(format!("window_{i:05}.bdsg")), &bytes)?;
    }
    eprintln!("wrote {} graphs to {}", data.len(), dir.display());
    Ok(())
}

fn load_window_file(
    path: &Path,
    pc: &PipelineConfig,
    format: Option<DatasetFormat>,
) -> Result<Dataset> {
    let data = load_dataset(
        path,
        format.unwrap_or_else(|| DatasetFormat::from_path(path)),
    )?;
    if data.n_channels() == 1 {
        Ok(data)
    } else {
        select_channel(&data, &pc.dataset.channel)
    }
}

fn graph(a: GraphArgs) -> Result<()> {
    let pc = a.cfg.resolve()?;
    let data = load_window_file(&a.window, &pc, a.cfg.format)?;
    write_atomic(&a.out, &window_graph_bytes(&data, a.index, &pc)?)
}

fn train(a: TrainArgs) -> Result<()> {
    let pc = a.cfg.resolve()?;
    let data = load_configured(&pc)?;
    let out = &pc.output_dir;
    let folds = run_loso(&data, &pc, threads_from_env()?)?;
    for f in &folds {
        save_model(
            &out.join(format!("fold_{:03}.ldgc", f.subject)),
            &pc.model,
            &f.params,
        )?;
        write_atomic(
            &out.join(format!("fold_{:03}.history.json", f.subject)),
            &json_bytes(&f.history)?,
        )?;
        eprintln!("subject {}: accuracy {:.4}", f.subject, f.metrics.accuracy);
    }
    // Final model on every window, for deployment.
    let windows = data.windows()?;
    let inputs = prepare_inputs(&windows, &pc, true)?;
    let labels: Vec<Label> = windows
        .iter()
        .enumerate()
        .map(|(index, w)| {
            w.label.ok_or(Error::Window {
                index,
                detail: "unlabelled window".into(),
            })
        })
        .collect::<Result<_>>()?;
    let set: Vec<(Matrix, Label)> = inputs.into_iter().zip(labels).collect();
    let (params, history) = train_model(&set, &pc.model, &pc.train)?;
    save_model(&out.join("model.ldgc"), &pc.model, &params)?;
    write_atomic(&out.join("model.history.json"), &json_bytes(&history)?)?;
    write_atomic(&out.join("config.toml"), pc.to_toml().as_bytes())
}

fn prune_cmd(a: PruneArgs) -> Result<()> {
    let mut pcfg = match &a.config {
        Some(path) => PipelineConfig::load(path)?.prune,
        None => PruneConfig::default(),
    };
    if let Some(v) = a.pr_channel {
        pcfg.pr_channel = v;
    }
    if let Some(v) = a.pr_neuron {
        pcfg.pr_neuron = v;
    }
    let (cfg, params) = load_model(&a.input)?;
    let (pruned, mut report) = prune(&params, &cfg, &pcfg)?;
    if a.latency_reps > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inputs: Vec<Matrix> = (0..8)
            .map(|_| {
                let data = (0..cfg.in_channels * cfg.input_len)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                Matrix::from_vec(cfg.in_channels, cfg.input_len, data)
            })
            .collect::<Result<_>>()?;
        let (before, after) = compare_latency(&params, &pruned, &cfg, &inputs, a.latency_reps)?;
        report.latency_before_ms = Some(before.median_ms);
        report.latency_after_ms = Some(after.median_ms);
    }
    save_model(&a.out, &cfg, &pruned)?;
    write_atomic(&a.report, &json_bytes(&report)?)
}

#[derive(Serialize)]
struct InferOutput {
    label: &'static str,
    p: Vec<f64>,
}

fn infer(a: InferArgs) -> Result<()> {
    let pc = a.cfg.resolve()?;
    let (cfg, params) = load_model(&a.model)?;
    let data = load_window_file(&a.window, &pc, a.cfg.format)?;
    let (label, p) = predict(&params, &cfg, &data.window(a.index)?, &pc)?;
    let out = InferOutput {
        label: label.name(),
        p,
    };
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let pc = a.cfg.resolve()?;
    let data = load_configured(&pc)?;
    let opts = BenchOptions {
        latency_reps: a.latency_reps,
        ablations: !a.no_ablations,
        threads: threads_from_env()?,
    };
    let outcome = run_bench(&data, &pc, &opts)?;
    let out = &pc.output_dir;
    write_atomic(&out.join("report.json"), &json_bytes(&outcome.report)?)?;
    write_atomic(
        &out.join("folds.csv"),
        folds_csv(&outcome.report.folds).as_bytes(),
    )?;
    let m = &outcome.report.performance;
    eprintln!(
        "LOSO mean accuracy {:.4}, F1 {:.4}; report in {}",
        m.accuracy,
        m.f1,
        out.join("report.json").display()
    );
    Ok(())
}
