//! Samples the global and local views of a graph and aggregates the three
//! channels into the 3×n model input.

use ldgcn::data::{synth_generate, SynthConfig};
use ldgcn::graph::{
    aggregate_nodes, augment, build_bdsag, DEFAULT_GLOBAL_RATIO, DEFAULT_LOCAL_RATIO,
};
use ldgcn::signal::{compute_bdst, decompose_bands, to_frequency, BandEdges, Wavelet};

fn main() -> ldgcn::Result<()> {
    let data = synth_generate(&SynthConfig {
        n_per_class: 1,
        ..SynthConfig::default()
    })?;
    let window = data.window(1)?;
    let freq = to_frequency(&window, Wavelet::Db4)?;
    let bands = decompose_bands(&freq, window.sample_rate(), &BandEdges::default())?;
    let graph = build_bdsag(&freq, &compute_bdst(&bands), 8)?;

    for seed in [0, 1] {
        let aug = augment(&graph, DEFAULT_GLOBAL_RATIO, DEFAULT_LOCAL_RATIO, seed)?;
        let live: Vec<usize> = aug.channels.iter().map(|g| g.live_count()).collect();
        let input = aggregate_nodes(&aug);
        let row_norm = |r: usize| input.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "seed {seed}: live nodes {live:?}, input {}x{}, row norms {:.3} {:.3} {:.3}",
            input.rows(),
            input.cols(),
            row_norm(0),
            row_norm(1),
            row_norm(2)
        );
    }
    Ok(())
}
