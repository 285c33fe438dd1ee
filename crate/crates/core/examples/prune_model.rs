//! Prunes a freshly initialised model and compares FLOPs, outputs and
//! latency of the dense and sparse inference routes.

use ldgcn::bench::{compare_latency, model_flops};
use ldgcn::model::{infer, init_model, ModelConfig};
use ldgcn::pruning::{prune, sparse_forward, PruneConfig};
use ldgcn::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldgcn::Result<()> {
    let cfg = ModelConfig::default();
    let params = init_model(&cfg, 0)?;
    let (pruned, report) = prune(&params, &cfg, &PruneConfig::default())?;
    println!(
        "pruned channels {:?}, {} neurons, {} values zeroed",
        report.pruned_channel_indices,
        report.pruned_neuron_indices.len(),
        report.pruned_param_count
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inputs: Vec<Matrix> = (0..8)
        .map(|_| {
            let data = (0..cfg.in_channels * cfg.input_len)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            Matrix::from_vec(cfg.in_channels, cfg.input_len, data)
        })
        .collect::<ldgcn::Result<_>>()?;

    let (sparse, flops) = sparse_forward(&pruned, &cfg, &inputs[0])?;
    let dense = infer(&pruned, &cfg, &inputs[0])?;
    println!("sparse == dense: {}", sparse == dense);
    println!(
        "FLOPs {} -> {}",
        model_flops(&cfg, &params.channel_mask, &params.neuron_mask),
        flops
    );
    let (before, after) = compare_latency(&params, &pruned, &cfg, &inputs, 1000)?;
    println!(
        "median latency {:.4} ms -> {:.4} ms",
        before.median_ms, after.median_ms
    );
    Ok(())
}
