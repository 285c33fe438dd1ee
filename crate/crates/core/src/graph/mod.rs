//! Baseline drowsiness status adjacency graphs.
//!
//! A graph has one node per wavelet coefficient. Edges connect coefficient
//! `r` to the BDST value at `c` for every column within `K` of the row, with
//! weight `(x_r - BDST_c) / |r - c|`. Weights are held in banded storage so
//! construction, sampling and aggregation are all `O(n·K)`.

mod io;

pub use io::{read_graph, write_graph, GRAPH_MAGIC};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::{BdstVector, FreqSignal};

/// Default connectivity coefficient.
pub const DEFAULT_K: usize = 8;
/// Default retained ratio of the global view.
pub const DEFAULT_GLOBAL_RATIO: f64 = 0.8;
/// Default retained ratio of the local view.
pub const DEFAULT_LOCAL_RATIO: f64 = 0.3;

/// Symmetric weighted graph with banded weights and per-node features.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjGraph {
    n: usize,
    band_k: usize,
    half_width: usize,
    /// Row `r` holds columns `r - half_width ..= r + half_width`.
    band: Vec<f64>,
    features: Vec<f64>,
    live: Vec<bool>,
}

impl AdjGraph {
    /// Empty graph (zero weights, zero features, all nodes dropped) with the
    /// given connectivity coefficient; `band_k == 0` means dense.
    pub(crate) fn empty(n: usize, band_k: usize) -> Self {
        let half_width = if band_k == 0 {
            n.saturating_sub(1)
        } else {
            band_k
        };
        let stride = 2 * half_width + 1;
        AdjGraph {
            n,
            band_k,
            half_width,
            band: vec![0.0; n * stride],
            features: vec![0.0; n],
            live: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Connectivity coefficient used at construction, 0 for dense.
    pub fn band_k(&self) -> usize {
        self.band_k
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Whether node `i` survived view sampling.
    pub fn is_live(&self, i: usize) -> bool {
        self.live[i]
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    fn stride(&self) -> usize {
        2 * self.half_width + 1
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let off = c as isize - r as isize + self.half_width as isize;
        if off < 0 || off as usize >= self.stride() {
            None
        } else {
            Some(r * self.stride() + off as usize)
        }
    }

    /// Column range stored for row `r`.
    fn columns(&self, r: usize) -> std::ops::Range<usize> {
        r.saturating_sub(self.half_width)..(r + self.half_width + 1).min(self.n)
    }

    pub fn weight(&self, r: usize, c: usize) -> f64 {
        assert!(
            r < self.n && c < self.n,
            "index ({r}, {c}) out of bounds for n = {}",
            self.n
        );
        self.slot(r, c).map_or(0.0, |s| self.band[s])
    }

    pub(crate) fn set_weight(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c).expect("weight outside the stored band");
        self.band[s] = v;
    }

    pub(crate) fn set_feature(&mut self, i: usize, v: f64, live: bool) {
        self.features[i] = v;
        self.live[i] = live;
    }

    /// Dense copy of the weight matrix.
    pub fn dense_weights(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for c in self.columns(r) {
                m.set(r, c, self.band[self.slot(r, c).unwrap()]);
            }
        }
        m
    }

    /// Checks symmetry, unit diagonal on live nodes (zero on dropped ones)
    /// and bandedness.
    pub fn check_invariants(&self) -> Result<()> {
        for r in 0..self.n {
            let diag = self.weight(r, r);
            let want = if self.live[r] { 1.0 } else { 0.0 };
            if diag != want {
                return Err(Error::invalid(format!(
                    "diagonal {r} is {diag}, expected {want}"
                )));
            }
            for c in self.columns(r) {
                if self.weight(r, c) != self.weight(c, r) {
                    return Err(Error::invalid(format!(
                        "weights not symmetric at ({r}, {c})"
                    )));
                }
                if self.band_k > 0 && r.abs_diff(c) > self.band_k && self.weight(r, c) != 0.0 {
                    return Err(Error::invalid(format!(
                        "nonzero weight outside band at ({r}, {c})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Graph-level input: original graph plus the global and local views.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    pub channels: [AdjGraph; 3],
}

/// Builds the banded adjacency graph from wavelet coefficients and the BDST.
pub fn build_bdsag(freq: &FreqSignal, bdst: &BdstVector, k: usize) -> Result<AdjGraph> {
    build_bdsag_from_slices(&freq.values, &bdst.values, k)
}

pub fn build_bdsag_from_slices(x: &[f64], bdst: &[f64], k: usize) -> Result<AdjGraph> {
    if x.len() != bdst.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: bdst.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("a graph needs at least 2 nodes"));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::OutOfRange {
            name: "K",
            value: k as f64,
            range: "[1, n-1]",
        });
    }
    let mut g = AdjGraph::empty(n, k);
    for r in 0..n {
        g.set_feature(r, x[r], true);
        g.set_weight(r, r, 1.0);
        for c in r + 1..=(r + k).min(n - 1) {
            let w = (x[r] - bdst[c]) / (c - r) as f64;
            g.set_weight(r, c, w);
            g.set_weight(c, r, w);
        }
    }
    Ok(g)
}

fn retained_count(ratio: f64, n: usize) -> usize {
    // Absorb rounding in products like 0.3 * 10.
    let m = (ratio * n as f64 - 1e-9).ceil() as usize;
    m.clamp(1, n)
}

/// Keeps a seeded uniform sample of `ceil(ratio·n)` nodes and zeroes the rest.
pub fn sample_view(graph: &AdjGraph, ratio: f64, seed: u64) -> Result<AdjGraph> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::OutOfRange {
            name: "ratio",
            value: ratio,
            range: "(0, 1]",
        });
    }
    let n = graph.n;
    let m = retained_count(ratio, n);
    if m == n {
        return Ok(graph.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, m) {
        keep[i] = true;
    }

    let mut out = graph.clone();
    for r in 0..n {
        let live = keep[r] && graph.live[r];
        let feature = if live { graph.features[r] } else { 0.0 };
        out.set_feature(r, feature, live);
    }
    for r in 0..n {
        for c in graph.columns(r) {
            if !(out.live[r] && out.live[c]) {
                let s = out.slot(r, c).unwrap();
                out.band[s] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Stacks the graph with its nonlinearly mapped global and local views.
pub fn augment(
    graph: &AdjGraph,
    global_ratio: f64,
    local_ratio: f64,
    seed: u64,
) -> Result<AugmentedGraph> {
    if !(0.5..=1.0).contains(&global_ratio) {
        return Err(Error::OutOfRange {
            name: "R",
            value: global_ratio,
            range: "[0.5, 1]",
        });
    }
    if !(local_ratio > 0.0 && local_ratio <= 0.5) {
        return Err(Error::OutOfRange {
            name: "r",
            value: local_ratio,
            range: "(0, 0.5]",
        });
    }
    let mut global = sample_view(graph, global_ratio, seed)?;
    let mut local = sample_view(graph, local_ratio, seed.wrapping_add(1))?;
    for view in [&mut global, &mut local] {
        view.features.iter_mut().for_each(|f| *f = f.tanh());
    }
    Ok(AugmentedGraph {
        channels: [graph.clone(), global, local],
    })
}

/// Degree-normalised neighbourhood sum per node, one row per channel.
///
/// The degree of a live node counts every stored edge slot to another live
/// node (zero-valued weights included) plus the self loop; dropped nodes
/// produce 0.
pub fn aggregate_nodes(aug: &AugmentedGraph) -> Matrix {
    let n = aug.channels[0].n;
    let mut out = Matrix::zeros(aug.channels.len(), n);
    for (k, g) in aug.channels.iter().enumerate() {
        let row = out.row_mut(k);
        for i in 0..g.n {
            if !g.live[i] {
                continue;
            }
            let mut acc = 0.0;
            let mut degree = 0usize;
            let base = i * g.stride() + g.half_width - i;
            for j in g.columns(i) {
                if g.live[j] {
                    acc += g.band[base + j] * g.features[j];
                    degree += 1;
                }
            }
            row[i] = acc / degree as f64;
        }
    }
    out
}
