//! Runs the leave-one-subject-out benchmark on a small synthetic dataset and
//! prints the report as JSON.

use ldgcn::data::{synth_generate, SynthConfig};
use ldgcn::pipeline::{run_bench, BenchOptions, PipelineConfig};

fn main() -> ldgcn::Result<()> {
    let data = synth_generate(&SynthConfig {
        n_per_class: 80,
        ..SynthConfig::default()
    })?;
    let mut pc = PipelineConfig::default();
    pc.train.epochs = 15;
    let opts = BenchOptions {
        latency_reps: 200,
        ablations: false,
        threads: None,
    };
    let outcome = run_bench(&data, &pc, &opts)?;
    println!("{}", ldgcn::bench::folds_csv(&outcome.report.folds));
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.report).expect("report serializes")
    );
    Ok(())
}
