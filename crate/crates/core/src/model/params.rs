use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, FUSION_KERNEL};
use crate::error::{Error, Result};

/// Pointwise and depthwise tensors of one branch. Either pair is empty when
/// the corresponding stage is ablated.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// `width × in_channels`
    pub pw_w: Vec<f64>,
    pub pw_b: Vec<f64>,
    /// `width × kernel`
    pub dw_w: Vec<f64>,
    pub dw_b: Vec<f64>,
}

/// All trainable tensors. Also used for gradients and optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub branches: Vec<Branch>,
    /// `partial × 3`
    pub fusion_w: Vec<f64>,
    pub fusion_b: Vec<f64>,
    pub bn_gamma: Vec<f64>,
    pub bn_beta: Vec<f64>,
    /// `hidden × fused` (empty without a hidden layer)
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    /// `classes × head_inputs`
    pub fc2_w: Vec<f64>,
    pub fc2_b: Vec<f64>,
}

pub type Gradients = Weights;

/// Name and shape of every trainable tensor, in [`Weights::tensors`] order.
pub fn tensor_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let width = cfg.branch_width();
    let mut out = Vec::new();
    for b in 0..cfg.branches() {
        let pw = if cfg.has_pointwise() { width } else { 0 };
        let dw = if cfg.has_depthwise() { width } else { 0 };
        out.push((format!("branch{b}.pw.weight"), vec![pw, cfg.in_channels]));
        out.push((format!("branch{b}.pw.bias"), vec![pw]));
        out.push((
            format!("branch{b}.dw.weight"),
            vec![dw, cfg.branch_kernel(b)],
        ));
        out.push((format!("branch{b}.dw.bias"), vec![dw]));
    }
    let fused = cfg.fused_channels();
    let hidden = cfg.hidden_neurons();
    out.push((
        "fusion.weight".into(),
        vec![cfg.partial_channels(), FUSION_KERNEL],
    ));
    out.push(("fusion.bias".into(), vec![cfg.partial_channels()]));
    out.push(("bn.gamma".into(), vec![fused]));
    out.push(("bn.beta".into(), vec![fused]));
    out.push(("fc1.weight".into(), vec![hidden, fused]));
    out.push(("fc1.bias".into(), vec![hidden]));
    out.push(("fc2.weight".into(), vec![cfg.n_classes, cfg.head_inputs()]));
    out.push(("fc2.bias".into(), vec![cfg.n_classes]));
    out
}

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let shapes = tensor_shapes(cfg);
        let mut w = Weights {
            branches: (0..cfg.branches())
                .map(|_| Branch {
                    pw_w: Vec::new(),
                    pw_b: Vec::new(),
                    dw_w: Vec::new(),
                    dw_b: Vec::new(),
                })
                .collect(),
            fusion_w: Vec::new(),
            fusion_b: Vec::new(),
            bn_gamma: Vec::new(),
            bn_beta: Vec::new(),
            fc1_w: Vec::new(),
            fc1_b: Vec::new(),
            fc2_w: Vec::new(),
            fc2_b: Vec::new(),
        };
        for (t, (_, dims)) in w.tensors_mut().into_iter().zip(&shapes) {
            *t = vec![0.0; dims.iter().product()];
        }
        w
    }

    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut v = Vec::new();
        for b in &self.branches {
            v.extend([&b.pw_w, &b.pw_b, &b.dw_w, &b.dw_b]);
        }
        v.extend([
            &self.fusion_w,
            &self.fusion_b,
            &self.bn_gamma,
            &self.bn_beta,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = Vec::new();
        for b in &mut self.branches {
            v.extend([&mut b.pw_w, &mut b.pw_b, &mut b.dw_w, &mut b.dw_b]);
        }
        v.extend([
            &mut self.fusion_w,
            &mut self.fusion_b,
            &mut self.bn_gamma,
            &mut self.bn_beta,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
        ]);
        v
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All values flattened in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .into_iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn matches(&self, cfg: &ModelConfig) -> bool {
        self.tensors()
            .iter()
            .zip(tensor_shapes(cfg))
            .all(|(t, (_, dims))| t.len() == dims.iter().product::<usize>())
            && self.branches.len() == cfg.branches()
    }
}

/// Network parameters together with BatchNorm running statistics and the
/// pruning masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Weights,
    pub bn_running_mean: Vec<f64>,
    pub bn_running_var: Vec<f64>,
    /// One flag per fused channel; `false` means pruned.
    pub channel_mask: Vec<bool>,
    /// One flag per hidden neuron; `false` means pruned.
    pub neuron_mask: Vec<bool>,
}

impl ModelParams {
    /// All-zero weights with identity BatchNorm statistics and full masks.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        ModelParams {
            weights: Weights::zeros(cfg),
            bn_running_mean: vec![0.0; cfg.fused_channels()],
            bn_running_var: vec![1.0; cfg.fused_channels()],
            channel_mask: vec![true; cfg.fused_channels()],
            neuron_mask: vec![true; cfg.hidden_neurons()],
        }
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let fused = cfg.fused_channels();
        if !self.weights.matches(cfg)
            || self.bn_running_mean.len() != fused
            || self.bn_running_var.len() != fused
            || self.channel_mask.len() != fused
            || self.neuron_mask.len() != cfg.hidden_neurons()
        {
            return Err(Error::Shape(
                "parameters do not match the model configuration".into(),
            ));
        }
        if self.bn_running_var.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Shape(
                "BatchNorm running variance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Multiplier per trainable value: 0 where a mask removes it, 1 elsewhere.
    pub fn keep_map(&self, cfg: &ModelConfig) -> Weights {
        keep_map(cfg, &self.channel_mask, &self.neuron_mask)
    }

    /// Forces every masked value to exactly zero.
    pub fn apply_masks(&mut self, cfg: &ModelConfig) {
        let keep = self.keep_map(cfg);
        zero_masked(&mut self.weights, &keep);
    }

    /// Number of values currently removed by the masks.
    pub fn masked_count(&self, cfg: &ModelConfig) -> usize {
        self.keep_map(cfg)
            .tensors()
            .into_iter()
            .flatten()
            .filter(|&&k| k == 0.0)
            .count()
    }
}

pub(crate) fn zero_masked(target: &mut Weights, keep: &Weights) {
    for (t, k) in target.tensors_mut().into_iter().zip(keep.tensors()) {
        for (v, &keep) in t.iter_mut().zip(k) {
            if keep == 0.0 {
                *v = 0.0;
            }
        }
    }
}

/// See [`ModelParams::keep_map`].
pub fn keep_map(cfg: &ModelConfig, channel_mask: &[bool], neuron_mask: &[bool]) -> Weights {
    let mut keep = Weights::zeros(cfg);
    for t in keep.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 1.0);
    }
    let fused = cfg.fused_channels();
    let partial = cfg.partial_channels();
    let head = cfg.head_inputs();
    for (f, _) in channel_mask.iter().enumerate().filter(|(_, &on)| !on) {
        let (b, t) = cfg.split_channel(f);
        let br = &mut keep.branches[b];
        let kernel = cfg.branch_kernel(b);
        if cfg.has_pointwise() {
            br.pw_w[t * cfg.in_channels..(t + 1) * cfg.in_channels].fill(0.0);
            br.pw_b[t] = 0.0;
        }
        if cfg.has_depthwise() {
            br.dw_w[t * kernel..(t + 1) * kernel].fill(0.0);
            br.dw_b[t] = 0.0;
        }
        if f < partial {
            keep.fusion_w[f * FUSION_KERNEL..(f + 1) * FUSION_KERNEL].fill(0.0);
            keep.fusion_b[f] = 0.0;
        }
        keep.bn_gamma[f] = 0.0;
        keep.bn_beta[f] = 0.0;
        if cfg.has_hidden() {
            for j in 0..cfg.hidden {
                keep.fc1_w[j * fused + f] = 0.0;
            }
        } else {
            for c in 0..cfg.n_classes {
                keep.fc2_w[c * head + f] = 0.0;
            }
        }
    }
    if cfg.has_hidden() {
        for (j, _) in neuron_mask.iter().enumerate().filter(|(_, &on)| !on) {
            keep.fc1_w[j * fused..(j + 1) * fused].fill(0.0);
            keep.fc1_b[j] = 0.0;
            for c in 0..cfg.n_classes {
                keep.fc2_w[c * head + j] = 0.0;
            }
        }
    }
    keep
}

/// Uniform `(-s, s)` initialisation with `s = sqrt(1 / fan_in)` per layer.
pub fn init_model(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(cfg);
    let mut fill = |t: &mut Vec<f64>, fan_in: usize| {
        let s = (1.0 / fan_in as f64).sqrt();
        t.iter_mut().for_each(|v| *v = rng.gen_range(-s..s));
    };
    let w = &mut params.weights;
    for (b, br) in w.branches.iter_mut().enumerate() {
        fill(&mut br.pw_w, cfg.in_channels);
        fill(&mut br.pw_b, cfg.in_channels);
        fill(&mut br.dw_w, cfg.branch_kernel(b));
        fill(&mut br.dw_b, cfg.branch_kernel(b));
    }
    fill(&mut w.fusion_w, FUSION_KERNEL);
    fill(&mut w.fusion_b, FUSION_KERNEL);
    w.bn_gamma.fill(1.0);
    fill(&mut w.fc1_w, cfg.fused_channels());
    fill(&mut w.fc1_b, cfg.fused_channels());
    fill(&mut w.fc2_w, cfg.head_inputs());
    fill(&mut w.fc2_b, cfg.head_inputs());
    Ok(params)
}
