use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::{backward, nll_loss};
use super::config::{ModelConfig, TrainConfig, BN_MOMENTUM};
use super::forward::{forward_batch, Mode};
use super::params::{init_model, ModelParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

/// Index of the most probable class; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trains a freshly initialised model with Adam on batch-mean gradients.
///
/// Samples are reshuffled every epoch; the initialisation and the shuffles
/// are driven by `tc.seed`, so equal inputs give equal results.
pub fn train(
    dataset: &[(Matrix, Label)],
    cfg: &ModelConfig,
    tc: &TrainConfig,
) -> Result<(ModelParams, History)> {
    let params = init_model(cfg, tc.seed)?;
    train_from(params, dataset, cfg, tc)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(
    mut params: ModelParams,
    dataset: &[(Matrix, Label)],
    cfg: &ModelConfig,
    tc: &TrainConfig,
) -> Result<(ModelParams, History)> {
    cfg.validate()?;
    tc.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    params.check(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed_5eed);
    let mut state = AdamState::new(cfg);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = History::default();
    let mut step = 0u64;
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(tc.batch_size) {
            let inputs: Vec<&Matrix> = chunk.iter().map(|&i| &dataset[i].0).collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| dataset[i].1).collect();
            let cache = forward_batch(&params, cfg, &inputs, Mode::Train)?;
            for (item, label) in cache.items().iter().zip(&labels) {
                loss_sum += nll_loss(&item.log_probs, label.index())?;
                if argmax(&item.log_probs) == label.index() {
                    correct += 1;
                }
            }
            let grads = backward(&params, cfg, &cache, &labels)?;
            step += 1;
            adam_step(&mut params, cfg, &grads, &mut state, tc, step);
            update_running_stats(
                &mut params,
                cache.batch_mean(),
                cache.batch_var(),
                inputs.len() * cfg.input_len,
            );
        }
        history.epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        });
    }
    Ok((params, history))
}

fn update_running_stats(params: &mut ModelParams, mean: &[f64], var: &[f64], count: usize) {
    let unbias = if count > 1 {
        count as f64 / (count - 1) as f64
    } else {
        1.0
    };
    for f in 0..mean.len() {
        params.bn_running_mean[f] =
            (1.0 - BN_MOMENTUM) * params.bn_running_mean[f] + BN_MOMENTUM * mean[f];
        params.bn_running_var[f] =
            (1.0 - BN_MOMENTUM) * params.bn_running_var[f] + BN_MOMENTUM * var[f] * unbias;
    }
}
