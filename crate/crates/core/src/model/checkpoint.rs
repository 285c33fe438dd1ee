//! Model checkpoint file.
//!
//! Layout (little-endian):
//!
//! ```text
//! "LDGC" | u32 version | u32 config_len | config block
//! u32 tensor_count | { u32 name_len | name | u32 rank | rank × u32 dims | f32 data }*
//! u32 mask_count   | { u32 name_len | name | u32 len  | len × u8 (0 or 1) }*
//! ```
//!
//! The config block is `in_channels, conv_channels, kernel_a, kernel_b` as
//! u32, `partial_ratio` as f64, `hidden, n_classes, input_len` as u32 and the
//! variant code as u8.

use std::io::{Read, Write};
use std::path::Path;

use super::config::{ModelConfig, Variant};
use super::params::{tensor_shapes, ModelParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDGC";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CONFIG_BLOCK_LEN: usize = 4 * 4 + 8 + 3 * 4 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMask {
    pub name: String,
    pub bits: Vec<bool>,
}

/// In-memory image of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
    pub masks: Vec<NamedMask>,
}

fn config_block(cfg: &ModelConfig) -> Vec<u8> {
    let mut b = Vec::with_capacity(CONFIG_BLOCK_LEN);
    for v in [
        cfg.in_channels,
        cfg.conv_channels,
        cfg.kernel_a,
        cfg.kernel_b,
    ] {
        b.extend_from_slice(&(v as u32).to_le_bytes());
    }
    b.extend_from_slice(&cfg.partial_ratio.to_le_bytes());
    for v in [cfg.hidden, cfg.n_classes, cfg.input_len] {
        b.extend_from_slice(&(v as u32).to_le_bytes());
    }
    b.push(cfg.variant.code());
    b
}

fn err(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, len: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| err(format!("truncated while reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, what)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u32("name length")? as usize;
        if len > 4096 {
            return Err(err(format!("implausible name length {len}")));
        }
        String::from_utf8(self.bytes(len, "name")?).map_err(|_| err("name is not UTF-8"))
    }
}

fn parse_config(b: &[u8]) -> Result<ModelConfig> {
    if b.len() != CONFIG_BLOCK_LEN {
        return Err(err(format!(
            "config block has {} bytes, expected {CONFIG_BLOCK_LEN}",
            b.len()
        )));
    }
    let u = |off: usize| u32::from_le_bytes(b[off..off + 4].try_into().unwrap()) as usize;
    let variant =
        Variant::from_code(b[36]).ok_or_else(|| err(format!("unknown variant code {}", b[36])))?;
    Ok(ModelConfig {
        in_channels: u(0),
        conv_channels: u(4),
        kernel_a: u(8),
        kernel_b: u(12),
        partial_ratio: f64::from_le_bytes(b[16..24].try_into().unwrap()),
        hidden: u(24),
        n_classes: u(28),
        input_len: u(32),
        variant,
    })
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let cfg = config_block(&self.config);
        w.write_all(&(cfg.len() as u32).to_le_bytes())?;
        w.write_all(&cfg)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
            for &d in &t.dims {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let mut data = Vec::with_capacity(t.data.len() * 4);
            for v in &t.data {
                data.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&data)?;
        }
        w.write_all(&(self.masks.len() as u32).to_le_bytes())?;
        for m in &self.masks {
            w.write_all(&(m.name.len() as u32).to_le_bytes())?;
            w.write_all(m.name.as_bytes())?;
            w.write_all(&(m.bits.len() as u32).to_le_bytes())?;
            let bytes: Vec<u8> = m.bits.iter().map(|&b| b as u8).collect();
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader { inner: r };
        if &r.bytes(4, "magic")?[..] != CHECKPOINT_MAGIC {
            return Err(err("bad magic"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let cfg_len = r.u32("config length")? as usize;
        let config = parse_config(&r.bytes(cfg_len.min(1024), "config")?)?;
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = r.name()?;
            let rank = r.u32("rank")? as usize;
            if rank > 8 {
                return Err(err(format!("tensor {name}: implausible rank {rank}")));
            }
            let dims = (0..rank)
                .map(|_| r.u32("dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len: usize = dims.iter().product();
            let raw = r.bytes(len * 4, &name)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor { name, dims, data });
        }
        let count = r.u32("mask count")?;
        let mut masks = Vec::new();
        for _ in 0..count {
            let name = r.name()?;
            let len = r.u32("mask length")? as usize;
            let raw = r.bytes(len, &name)?;
            let bits = raw
                .iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(err(format!("mask {name}: byte {other} is not 0 or 1"))),
                })
                .collect::<Result<Vec<_>>>()?;
            masks.push(NamedMask { name, bits });
        }
        Ok(Checkpoint {
            config,
            tensors,
            masks,
        })
    }

    pub fn from_params(cfg: &ModelConfig, params: &ModelParams) -> Self {
        let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let mut tensors: Vec<NamedTensor> = tensor_shapes(cfg)
            .into_iter()
            .zip(params.weights.tensors())
            .map(|((name, dims), data)| NamedTensor {
                name,
                dims,
                data: to_f32(data),
            })
            .collect();
        let fused = cfg.fused_channels();
        tensors.push(NamedTensor {
            name: "bn.running_mean".into(),
            dims: vec![fused],
            data: to_f32(&params.bn_running_mean),
        });
        tensors.push(NamedTensor {
            name: "bn.running_var".into(),
            dims: vec![fused],
            data: to_f32(&params.bn_running_var),
        });
        Checkpoint {
            config: cfg.clone(),
            tensors,
            masks: vec![
                NamedMask {
                    name: "channel_mask".into(),
                    bits: params.channel_mask.clone(),
                },
                NamedMask {
                    name: "neuron_mask".into(),
                    bits: params.neuron_mask.clone(),
                },
            ],
        }
    }

    /// Rebuilds parameters; every expected tensor and mask must be present
    /// with the expected shape.
    pub fn to_params(&self) -> Result<(ModelConfig, ModelParams)> {
        let cfg = self.config.clone();
        cfg.validate()?;
        let mut params = ModelParams::zeros(&cfg);
        let find = |name: &str, dims: &[usize]| -> Result<Vec<f64>> {
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| err(format!("missing tensor {name}")))?;
            if t.dims != dims {
                return Err(err(format!(
                    "tensor {name} has shape {:?}, expected {dims:?}",
                    t.dims
                )));
            }
            Ok(t.data.iter().map(|&v| v as f64).collect())
        };
        let shapes = tensor_shapes(&cfg);
        for (slot, (name, dims)) in params.weights.tensors_mut().into_iter().zip(&shapes) {
            *slot = find(name, dims)?;
        }
        let fused = cfg.fused_channels();
        params.bn_running_mean = find("bn.running_mean", &[fused])?;
        params.bn_running_var = find("bn.running_var", &[fused])?;
        let mask = |name: &str, len: usize| -> Result<Vec<bool>> {
            let m = self
                .masks
                .iter()
                .find(|m| m.name == name)
                .ok_or_else(|| err(format!("missing mask {name}")))?;
            if m.bits.len() != len {
                return Err(err(format!(
                    "mask {name} has {} entries, expected {len}",
                    m.bits.len()
                )));
            }
            Ok(m.bits.clone())
        };
        params.channel_mask = mask("channel_mask", fused)?;
        params.neuron_mask = mask("neuron_mask", cfg.hidden_neurons())?;
        params.check(&cfg)?;
        Ok((cfg, params))
    }
}

/// Writes a checkpoint atomically (temporary file, then rename).
pub fn save_model(path: &Path, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    crate::io::write_atomic(path, &Checkpoint::from_params(cfg, params).to_bytes())
}

pub fn load_model(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::read(bytes.as_slice())?.to_params()
}
