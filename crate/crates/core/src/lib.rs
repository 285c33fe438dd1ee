//! Drowsiness detection from single-channel EEG.
//!
//! Windows are moved into a wavelet domain, split into δ/θ/α/β bands and
//! turned into a banded adjacency graph anchored on the θ/α baseline. The
//! graph and two sampled views feed a lightweight dual-branch convolutional
//! network, which can then be pruned at channel and neuron granularity for
//! cheap inference.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod pruning;
pub mod signal;

pub use error::{Error, Result};
pub use matrix::Matrix;
