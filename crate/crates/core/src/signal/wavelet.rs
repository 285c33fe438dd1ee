//! Periodized orthogonal discrete wavelet transform.
//!
//! Coefficients are laid out as `[a_J, d_J, d_{J-1}, ..., d_1]`, the usual
//! "wavedec" order flattened into one vector of the input length. Because
//! the transform is periodized, each level is an orthogonal map and the full
//! transform preserves energy and inner products exactly (up to rounding).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

const DB2: [f64; 4] = [
    -0.129_409_522_551_260_38,
    0.224_143_868_042_013_38,
    0.836_516_303_737_807_9,
    0.482_962_913_144_534_14,
];

const DB3: [f64; 6] = [
    0.035_226_291_885_709_537,
    -0.085_441_273_882_026_66,
    -0.135_011_020_010_254_59,
    0.459_877_502_118_491_57,
    0.806_891_509_311_092_6,
    0.332_670_552_950_082_6,
];

const DB4: [f64; 8] = [
    -0.010_597_401_785_069_032,
    0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    -0.187_034_811_719_093_08,
    -0.027_983_769_416_859_854,
    0.630_880_767_929_858_9,
    0.714_846_570_552_915_6,
    0.230_377_813_308_896_5,
];

/// Supported Daubechies bases, named as in the usual `dbN` convention
/// (`db4` has 8 taps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Wavelet {
    Haar,
    Db2,
    Db3,
    Db4,
}

impl Wavelet {
    /// Decomposition low-pass filter.
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db2 => &DB2,
            Wavelet::Db3 => &DB3,
            Wavelet::Db4 => &DB4,
        }
    }

    /// Quadrature mirror high-pass filter, `g[k] = (-1)^k h[L-1-k]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let len = h.len();
        (0..len)
            .map(|k| {
                let v = h[len - 1 - k];
                if k % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    pub fn filter_len(self) -> usize {
        self.lowpass().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db2 => "db2",
            Wavelet::Db3 => "db3",
            Wavelet::Db4 => "db4",
        }
    }

    /// Number of decomposition levels used for a signal of length `n`.
    ///
    /// The level count is the largest `J` such that `2^J` divides `n` and the
    /// coarsest approximation still spans the filter support, but never less
    /// than one. Odd lengths cannot be periodized and are rejected.
    pub fn levels_for(self, n: usize) -> Result<usize> {
        if n < 2 {
            return Err(Error::IncompatibleLength {
                len: n,
                reason: "at least two samples are required",
            });
        }
        if !n.is_multiple_of(2) {
            return Err(Error::IncompatibleLength {
                len: n,
                reason: "periodized transform needs an even length",
            });
        }
        let dyadic = n.trailing_zeros() as usize;
        let support = self.filter_len().saturating_sub(1).max(1);
        let mut by_support = 0usize;
        while (n >> (by_support + 1)) >= support && by_support < dyadic {
            by_support += 1;
        }
        Ok(by_support.clamp(1, dyadic))
    }

    /// Forward multi-level transform.
    pub fn forward(self, signal: &[f64]) -> Result<Vec<f64>> {
        let levels = self.levels_for(signal.len())?;
        let h = self.lowpass();
        let g = self.highpass();
        let mut out = signal.to_vec();
        let mut scratch = vec![0.0; signal.len()];
        let mut len = signal.len();
        for _ in 0..levels {
            analysis_step(&out[..len], h, &g, &mut scratch[..len]);
            out[..len].copy_from_slice(&scratch[..len]);
            len /= 2;
        }
        Ok(out)
    }

    /// Inverse of [`Wavelet::forward`].
    pub fn inverse(self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let levels = self.levels_for(coeffs.len())?;
        let h = self.lowpass();
        let g = self.highpass();
        let mut out = coeffs.to_vec();
        let mut scratch = vec![0.0; coeffs.len()];
        let mut len = coeffs.len() >> levels;
        for _ in 0..levels {
            len *= 2;
            synthesis_step(&out[..len], h, &g, &mut scratch[..len]);
            out[..len].copy_from_slice(&scratch[..len]);
        }
        Ok(out)
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let n = x.len();
    let half = n / 2;
    for i in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * i + k) % n];
            a += hk * v;
            d += gk * v;
        }
        out[i] = a;
        out[half + i] = d;
    }
}

fn synthesis_step(c: &[f64], h: &[f64], g: &[f64], out: &mut [f64]) {
    let n = c.len();
    let half = n / 2;
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..half {
        let a = c[i];
        let d = c[half + i];
        for (k, (&hk, &gk)) in h.iter().zip(g).enumerate() {
            out[(2 * i + k) % n] += hk * a + gk * d;
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Wavelet::Haar),
            "db2" => Ok(Wavelet::Db2),
            "db3" => Ok(Wavelet::Db3),
            "db4" => Ok(Wavelet::Db4),
            _ => Err(Error::UnsupportedWavelet(s.to_string())),
        }
    }
}

impl TryFrom<String> for Wavelet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Wavelet> for String {
    fn from(w: Wavelet) -> String {
        w.name().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Wavelet; 4] = [Wavelet::Haar, Wavelet::Db2, Wavelet::Db3, Wavelet::Db4];

    #[test]
    fn filters_are_orthonormal() {
        for w in ALL {
            let h = w.lowpass();
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-12, "{w}");
            for shift in (0..h.len()).step_by(2) {
                let dot: f64 = (0..h.len() - shift).map(|k| h[k] * h[k + shift]).sum();
                let expected = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12, "{w} shift {shift}: {dot}");
            }
        }
    }

    #[test]
    fn level_selection() {
        assert_eq!(Wavelet::Db4.levels_for(384).unwrap(), 5);
        assert_eq!(Wavelet::Db4.levels_for(16).unwrap(), 1);
        assert_eq!(Wavelet::Db4.levels_for(2).unwrap(), 1);
        assert_eq!(Wavelet::Haar.levels_for(384).unwrap(), 7);
        assert!(Wavelet::Db4.levels_for(1).is_err());
        assert!(Wavelet::Db4.levels_for(7).is_err());
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        for w in ALL {
            for n in [2usize, 4, 6, 16, 384, 512] {
                let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
                let c = w.forward(&x).unwrap();
                let back = w.inverse(&c).unwrap();
                let e_x: f64 = x.iter().map(|v| v * v).sum();
                let e_c: f64 = c.iter().map(|v| v * v).sum();
                assert!((e_x - e_c).abs() <= 1e-10 * e_x.max(1.0), "{w} n={n}");
                for (a, b) in x.iter().zip(&back) {
                    assert!((a - b).abs() < 1e-10, "{w} n={n}");
                }
            }
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!("DB4".parse::<Wavelet>().unwrap(), Wavelet::Db4);
        assert_eq!("db1".parse::<Wavelet>().unwrap(), Wavelet::Haar);
        assert!(matches!(
            "sym8".parse::<Wavelet>(),
            Err(Error::UnsupportedWavelet(_))
        ));
    }
}
