use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FreqSignal;
use crate::error::{Error, Result};

/// Band boundaries in Hz: δ = [e0, e1), θ = [e1, e2), α = [e2, e3), β = [e3, e4].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BandEdges(pub [f64; 5]);

impl Default for BandEdges {
    fn default() -> Self {
        BandEdges([0.0, 4.0, 8.0, 12.0, 20.0])
    }
}

impl BandEdges {
    pub fn validate(&self) -> Result<()> {
        let e = &self.0;
        if e[0] < 0.0 || e.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "band edges must be non-negative and strictly increasing, got {e:?}"
            )));
        }
        Ok(())
    }

    /// Index of the band containing `freq`, if any.
    pub fn band_of(&self, freq: f64) -> Option<usize> {
        let e = &self.0;
        if freq >= e[0] && freq < e[1] {
            Some(0)
        } else if freq >= e[1] && freq < e[2] {
            Some(1)
        } else if freq >= e[2] && freq < e[3] {
            Some(2)
        } else if freq >= e[3] && freq <= e[4] {
            Some(3)
        } else {
            None
        }
    }
}

impl TryFrom<Vec<f64>> for BandEdges {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; 5] = v.try_into().map_err(|v: Vec<f64>| {
            Error::invalid(format!("expected 5 band edges, got {}", v.len()))
        })?;
        let edges = BandEdges(arr);
        edges.validate()?;
        Ok(edges)
    }
}

impl From<BandEdges> for Vec<f64> {
    fn from(b: BandEdges) -> Vec<f64> {
        b.0.to_vec()
    }
}

/// DFT grid on which the band masks are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandGrid {
    /// Zero-pad to the next power of two, mask, truncate. Finer frequency
    /// resolution; truncation leaves some spectral spill between bands.
    #[default]
    Padded,
    /// Mask the DFT of the window at its own length. The bands are exact
    /// orthogonal projections but resolution is `sample_rate / n`.
    Native,
}

/// Band-limited components of a window, each expressed in the same wavelet
/// domain as the source [`FreqSignal`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BandSet {
    pub fn zeros(n: usize) -> Self {
        BandSet {
            delta: vec![0.0; n],
            theta: vec![0.0; n],
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn bands(&self) -> [&[f64]; 4] {
        [&self.delta, &self.theta, &self.alpha, &self.beta]
    }

    /// Sum of squares of each band, in δ, θ, α, β order.
    pub fn energies(&self) -> [f64; 4] {
        self.bands().map(|b| b.iter().map(|v| v * v).sum::<f64>())
    }
}

/// Splits a wavelet-domain signal into δ/θ/α/β components.
///
/// The signal is taken back to the time domain, zero-padded to the next
/// power of two, masked with ideal brick-wall filters in the DFT domain,
/// truncated to the original length and transformed forward again. The four
/// bands therefore sum to the 0–20 Hz content of the window.
pub fn decompose_bands(freq: &FreqSignal, sample_rate: f64, edges: &BandEdges) -> Result<BandSet> {
    decompose_bands_on(freq, sample_rate, edges, BandGrid::Padded)
}

/// [`decompose_bands`] with an explicit masking grid.
pub fn decompose_bands_on(
    freq: &FreqSignal,
    sample_rate: f64,
    edges: &BandEdges,
    grid: BandGrid,
) -> Result<BandSet> {
    edges.validate()?;
    if !(sample_rate > 0.0) {
        return Err(Error::OutOfRange {
            name: "sample_rate",
            value: sample_rate,
            range: "(0, inf)",
        });
    }
    let time = freq.to_time()?;
    let n = time.len();
    let padded = match grid {
        BandGrid::Padded => n.next_power_of_two(),
        BandGrid::Native => n,
    };

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(padded);
    let ifft = planner.plan_fft_inverse(padded);

    let mut spectrum: Vec<Complex64> = time
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(padded)
        .collect();
    fft.process(&mut spectrum);

    let bin_band: Vec<Option<usize>> = (0..padded)
        .map(|k| {
            let k_abs = k.min(padded - k);
            edges.band_of(k_abs as f64 * sample_rate / padded as f64)
        })
        .collect();

    let mut out: [Vec<f64>; 4] = Default::default();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (band, slot) in out.iter_mut().enumerate() {
        for ((dst, src), owner) in buf.iter_mut().zip(&spectrum).zip(&bin_band) {
            *dst = if *owner == Some(band) {
                *src
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        ifft.process(&mut buf);
        let scale = 1.0 / padded as f64;
        let band_time: Vec<f64> = buf[..n].iter().map(|c| c.re * scale).collect();
        *slot = freq.wavelet.forward(&band_time)?;
    }
    let [delta, theta, alpha, beta] = out;
    Ok(BandSet {
        delta,
        theta,
        alpha,
        beta,
    })
}
