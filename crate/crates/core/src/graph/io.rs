//! Little-endian graph file: `"BDSG"`, u32 n, u32 K, n×n f32 weights
//! (row-major), n f32 node features.

use std::io::{Read, Write};

use super::AdjGraph;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"BDSG";

pub fn write_graph<W: Write>(graph: &AdjGraph, mut w: W) -> std::io::Result<()> {
    let n = graph.n();
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(graph.band_k() as u32).to_le_bytes())?;
    let mut row = Vec::with_capacity(n * 4);
    for r in 0..n {
        row.clear();
        for c in 0..n {
            row.extend_from_slice(&(graph.weight(r, c) as f32).to_le_bytes());
        }
        w.write_all(&row)?;
    }
    for &f in graph.features() {
        w.write_all(&(f as f32).to_le_bytes())?;
    }
    Ok(())
}

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "graph file",
        detail: detail.into(),
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| format_err(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a graph; nodes whose diagonal weight is zero are treated as dropped.
pub fn read_graph<R: Read>(mut r: R) -> Result<AdjGraph> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| format_err(format!("truncated header: {e}")))?;
    if &magic != GRAPH_MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let n = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    if n < 2 || (k > 0 && k > n - 1) {
        return Err(format_err(format!("invalid n = {n}, K = {k}")));
    }
    let mut bytes = vec![0u8; n * n * 4 + n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| format_err(format!("truncated body: {e}")))?;
    let value = |i: usize| f32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as f64;

    let mut g = AdjGraph::empty(n, k);
    for i in 0..n {
        let diag = value(i * n + i);
        g.set_feature(i, value(n * n + i), diag != 0.0);
    }
    for row in 0..n {
        for c in 0..n {
            let v = value(row * n + c);
            if k > 0 && row.abs_diff(c) > k {
                if v != 0.0 {
                    return Err(format_err(format!(
                        "nonzero weight at ({row}, {c}) outside band K = {k}"
                    )));
                }
            } else {
                g.set_weight(row, c, v);
            }
        }
    }
    Ok(g)
}
