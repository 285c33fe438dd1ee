//! Labelled multi-channel EEG datasets, on-disk formats, channel selection,
//! leave-one-subject-out folds and a synthetic generator.

mod format;
mod synth;

pub use format::{
    load_dataset, parse_csv, read_binary, save_dataset, write_binary, write_csv, DatasetFormat,
};
pub use synth::{synth_generate, SynthConfig};

use std::collections::BTreeSet;

use crate::signal::{EegWindow, Label};
use crate::{Error, Result};

/// Electrode names of the 30-channel recordings, in file order.
pub const MONTAGE_30: [&str; 30] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FT7", "FC3", "FCz", "FC4", "FT8", "T3", "C3",
    "Cz", "C4", "T4", "TP7", "CP3", "CPz", "CP4", "TP8", "T5", "P3", "Pz", "P4", "T6", "O1", "Oz",
    "O2",
];

/// Name given to the only channel of single-channel data.
pub const SINGLE_CHANNEL: &str = "Oz";

/// Names assumed for a file with `n` channels.
pub fn default_channel_names(n: usize) -> Vec<String> {
    match n {
        1 => vec![SINGLE_CHANNEL.to_string()],
        30 => MONTAGE_30.iter().map(|s| s.to_string()).collect(),
        _ => (0..n).map(|i| format!("ch{i}")).collect(),
    }
}

/// One multi-channel window.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub subject_id: u16,
    pub label: Option<Label>,
    /// Channel-major samples: `channels[c][t]`.
    pub channels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub channel_names: Vec<String>,
    pub window_len: usize,
    pub sample_rate: f64,
}

impl Dataset {
    /// Builds a dataset after checking that every record has the declared
    /// channel count and window length.
    pub fn new(
        records: Vec<Record>,
        channel_names: Vec<String>,
        window_len: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if channel_names.is_empty() {
            return Err(Error::invalid("a dataset needs at least one channel"));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sample_rate",
                value: sample_rate,
                range: "(0, inf)",
            });
        }
        for (index, r) in records.iter().enumerate() {
            if r.channels.len() != channel_names.len() {
                return Err(Error::Window {
                    index,
                    detail: format!(
                        "expected {} channels, got {}",
                        channel_names.len(),
                        r.channels.len()
                    ),
                });
            }
            if let Some(c) = r.channels.iter().find(|c| c.len() != window_len) {
                return Err(Error::Window {
                    index,
                    detail: format!("expected {window_len} samples, got {}", c.len()),
                });
            }
        }
        Ok(Dataset {
            records,
            channel_names,
            window_len,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn subjects(&self) -> BTreeSet<u16> {
        self.records.iter().map(|r| r.subject_id).collect()
    }

    pub fn labels(&self) -> Vec<Option<Label>> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Window `index` as a single-channel window of channel 0.
    pub fn window(&self, index: usize) -> Result<EegWindow> {
        let r = self
            .records
            .get(index)
            .ok_or_else(|| Error::invalid(format!("window index {index} out of range")))?;
        EegWindow::new(
            r.channels[0].clone(),
            self.sample_rate,
            r.subject_id,
            r.label,
        )
    }

    /// All windows of a single-channel dataset.
    pub fn windows(&self) -> Result<Vec<EegWindow>> {
        if self.n_channels() != 1 {
            return Err(Error::invalid(format!(
                "expected single-channel data, got {} channels; select a channel first",
                self.n_channels()
            )));
        }
        (0..self.len()).map(|i| self.window(i)).collect()
    }

    /// The records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            channel_names: self.channel_names.clone(),
            window_len: self.window_len,
            sample_rate: self.sample_rate,
        }
    }
}

/// Keeps only the named channel. Names compare case-insensitively.
pub fn select_channel(dataset: &Dataset, name: &str) -> Result<Dataset> {
    let c = dataset
        .channel_names
        .iter()
        .position(|n| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownChannel(name.to_string()))?;
    let records = dataset
        .records
        .iter()
        .map(|r| Record {
            subject_id: r.subject_id,
            label: r.label,
            channels: vec![r.channels[c].clone()],
        })
        .collect();
    Ok(Dataset {
        records,
        channel_names: vec![dataset.channel_names[c].clone()],
        window_len: dataset.window_len,
        sample_rate: dataset.sample_rate,
    })
}

/// One leave-one-subject-out fold as record indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub subject: u16,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per subject, in ascending subject order.
pub fn loso_splits(dataset: &Dataset) -> Result<Vec<Fold>> {
    let subjects = dataset.subjects();
    if subjects.len() < 2 {
        return Err(Error::invalid(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    Ok(subjects
        .into_iter()
        .map(|s| {
            let (test, train) =
                (0..dataset.len()).partition(|&i| dataset.records[i].subject_id == s);
            Fold {
                subject: s,
                train,
                test,
            }
        })
        .collect())
}
