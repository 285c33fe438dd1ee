use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{default_channel_names, Dataset, Record};
use crate::signal::{Label, SAMPLE_RATE, WINDOW_LEN};
use crate::{Error, Result};

/// Sinusoid components sit in 1 Hz bins from 1 Hz up to this frequency.
const MAX_FREQ_HZ: usize = 30;
const PSEUDO_SUBJECTS: u16 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Windows per class across both pseudo-subjects.
    pub n_per_class: usize,
    pub seed: u64,
    /// Amplitude multiplier for 4–12 Hz components of drowsy windows.
    pub drowsy_band_gain: f64,
    pub noise_std: f64,
    /// Id of the first pseudo-subject; the second is `first_subject + 1`.
    pub first_subject: u16,
    pub window_len: usize,
    pub sample_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 100,
            seed: 0,
            drowsy_band_gain: 3.0,
            noise_std: 0.1,
            first_subject: 1,
            window_len: WINDOW_LEN,
            sample_rate: SAMPLE_RATE,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::invalid("n_per_class must be positive"));
        }
        if !(self.drowsy_band_gain > 1.0 && self.drowsy_band_gain.is_finite()) {
            return Err(Error::OutOfRange {
                name: "drowsy_band_gain",
                value: self.drowsy_band_gain,
                range: "(1, inf)",
            });
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::OutOfRange {
                name: "noise_std",
                value: self.noise_std,
                range: "[0, inf)",
            });
        }
        if self.window_len < 2 || !(self.sample_rate > 2.0 * MAX_FREQ_HZ as f64) {
            return Err(Error::invalid(
                "window_len must be >= 2 and sample_rate above 60 Hz",
            ));
        }
        if self
            .first_subject
            .checked_add(PSEUDO_SUBJECTS - 1)
            .is_none()
        {
            return Err(Error::invalid("first_subject too large"));
        }
        Ok(())
    }
}

/// Seeded synthetic single-channel dataset.
///
/// Each window is a sum of one sinusoid per 1 Hz bin with amplitude falling
/// as `1/sqrt(f)`, random phase and jittered frequency, plus white noise.
/// Every pseudo-subject has its own fixed spectral profile. Drowsy windows
/// scale the 4–12 Hz components by `drowsy_band_gain`. Windows alternate
/// Alert/Drowsiness and the pair `j` belongs to pseudo-subject `j % 2`.
/// Samples are rounded to f32 so that the dataset survives a binary
/// round-trip unchanged.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let profiles: Vec<Vec<f64>> = (0..PSEUDO_SUBJECTS)
        .map(|_| (0..MAX_FREQ_HZ).map(|_| rng.gen_range(0.7..1.3)).collect())
        .collect();
    let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise_std");
    let dt = 1.0 / cfg.sample_rate;
    let mut records = Vec::with_capacity(2 * cfg.n_per_class);
    for j in 0..cfg.n_per_class {
        let who = (j % PSEUDO_SUBJECTS as usize) as u16;
        for label in [Label::Alert, Label::Drowsiness] {
            let mut x = vec![0.0; cfg.window_len];
            for (bin, &weight) in profiles[who as usize].iter().enumerate() {
                let freq = bin as f64 + 1.0 + rng.gen_range(-0.5..0.5);
                let mut amp = weight * rng.gen_range(0.8..1.2) / freq.sqrt();
                if label == Label::Drowsiness && (4.0..12.0).contains(&freq) {
                    amp *= cfg.drowsy_band_gain;
                }
                let phase = rng.gen_range(0.0..TAU);
                for (t, v) in x.iter_mut().enumerate() {
                    *v += amp * (TAU * freq * t as f64 * dt + phase).sin();
                }
            }
            for v in x.iter_mut() {
                *v = (*v + noise.sample(&mut rng)) as f32 as f64;
            }
            records.push(Record {
                subject_id: cfg.first_subject + who,
                label: Some(label),
                channels: vec![x],
            });
        }
    }
    Dataset::new(
        records,
        default_channel_names(1),
        cfg.window_len,
        cfg.sample_rate,
    )
}
