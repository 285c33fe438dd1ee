//! The lightweight dual graph-convolutional network: parameters, forward and
//! hand-derived backward passes, Adam and the training loop.

mod adam;
mod backward;
pub mod checkpoint;
mod config;
mod forward;
mod params;
mod train;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, nll_loss};
pub use config::{ModelConfig, TrainConfig, Variant, BN_EPS, BN_MOMENTUM, FUSION_KERNEL};
pub use forward::{forward, forward_batch, infer, infer_counted, ForwardCache, ItemCache, Mode};
pub use params::{init_model, keep_map, tensor_shapes, Branch, Gradients, ModelParams, Weights};
pub use train::{argmax, train, train_from, EpochStats, History};
