//! Builds the banded adjacency graph for one synthetic window and shows how
//! the band half-width `k` controls sparsity.

use ldgcn::data::{synth_generate, SynthConfig};
use ldgcn::graph::build_bdsag;
use ldgcn::signal::{compute_bdst, decompose_bands, to_frequency, BandEdges, Wavelet};

fn main() -> ldgcn::Result<()> {
    let data = synth_generate(&SynthConfig {
        n_per_class: 1,
        ..SynthConfig::default()
    })?;
    let window = data.window(0)?;
    let freq = to_frequency(&window, Wavelet::Db4)?;
    let bands = decompose_bands(&freq, window.sample_rate(), &BandEdges::default())?;
    let bdst = compute_bdst(&bands);

    for k in [1, 3, 8, 32] {
        let g = build_bdsag(&freq, &bdst, k)?;
        g.check_invariants()?;
        let n = g.n();
        let nonzero = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|&(r, c)| g.weight(r, c) != 0.0)
            .count();
        println!(
            "k = {k:>2}: {n} nodes, {nonzero} non-zero weights ({:.2}% dense), w[0][1] = {:.4}",
            100.0 * nonzero as f64 / (n * n) as f64,
            g.weight(0, 1)
        );
    }
    Ok(())
}
