//! Single-channel EEG windows, their wavelet-domain representation, band
//! decomposition and the baseline drowsiness status vector (θ/α mean).

mod bands;
mod wavelet;

pub use bands::{decompose_bands, decompose_bands_on, BandEdges, BandGrid, BandSet};
pub use wavelet::Wavelet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical window length of the benchmark recordings.
pub const WINDOW_LEN: usize = 384;
/// Canonical sampling rate of the benchmark recordings, in Hz.
pub const SAMPLE_RATE: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Alert,
    Drowsiness,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Alert => 0,
            Label::Drowsiness => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Label::Alert),
            1 => Ok(Label::Drowsiness),
            other => Err(Error::Label(other)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Alert => "Alert",
            Label::Drowsiness => "Drowsiness",
        }
    }
}

/// One labelled single-channel EEG segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EegWindow {
    samples: Vec<f64>,
    sample_rate: f64,
    pub subject_id: u16,
    /// `None` for unlabelled windows.
    pub label: Option<Label>,
}

impl EegWindow {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        subject_id: u16,
        label: Option<Label>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "a window needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "sample_rate",
                value: sample_rate,
                range: "(0, inf)",
            });
        }
        Ok(EegWindow {
            samples,
            sample_rate,
            subject_id,
            label,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Wavelet-domain coefficients of a window, same length as the window.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqSignal {
    pub values: Vec<f64>,
    pub wavelet: Wavelet,
}

impl FreqSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Back to the time domain.
    pub fn to_time(&self) -> Result<Vec<f64>> {
        self.wavelet.inverse(&self.values)
    }
}

/// Elementwise mean of the θ and α band sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BdstVector {
    pub values: Vec<f64>,
}

/// Forward wavelet transform of a window.
pub fn to_frequency(window: &EegWindow, wavelet: Wavelet) -> Result<FreqSignal> {
    let values = wavelet.forward(window.samples())?;
    Ok(FreqSignal { values, wavelet })
}

pub fn compute_bdst(bands: &BandSet) -> BdstVector {
    let values = bands
        .theta
        .iter()
        .zip(&bands.alpha)
        .map(|(t, a)| (t + a) / 2.0)
        .collect();
    BdstVector { values }
}
