use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture variant; everything except `Full` removes one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// One pointwise/depthwise branch instead of two.
    #[serde(rename = "pdwise-x1")]
    SingleBranch,
    /// Pooled features go straight to the output layer.
    #[serde(rename = "fc-x1")]
    SingleFc,
    NoPointwise,
    NoDepthwise,
    #[serde(rename = "no-partialconv")]
    NoPartialConv,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::SingleBranch,
        Variant::SingleFc,
        Variant::NoPointwise,
        Variant::NoDepthwise,
        Variant::NoPartialConv,
    ];

    pub const ABLATIONS: [Variant; 5] = [
        Variant::SingleBranch,
        Variant::SingleFc,
        Variant::NoPointwise,
        Variant::NoDepthwise,
        Variant::NoPartialConv,
    ];

    pub fn code(self) -> u8 {
        match self {
            Variant::Full => 0,
            Variant::SingleBranch => 1,
            Variant::SingleFc => 2,
            Variant::NoPointwise => 3,
            Variant::NoDepthwise => 4,
            Variant::NoPartialConv => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::SingleBranch => "pdwise-x1",
            Variant::SingleFc => "fc-x1",
            Variant::NoPointwise => "no-pointwise",
            Variant::NoDepthwise => "no-depthwise",
            Variant::NoPartialConv => "no-partialconv",
        }
    }
}

pub const FUSION_KERNEL: usize = 3;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub in_channels: usize,
    /// Output channels of each pointwise convolution.
    pub conv_channels: usize,
    pub kernel_a: usize,
    pub kernel_b: usize,
    /// Fraction of the fused channels that go through the partial convolution.
    pub partial_ratio: f64,
    pub hidden: usize,
    pub n_classes: usize,
    pub input_len: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            in_channels: 3,
            conv_channels: 8,
            kernel_a: 3,
            kernel_b: 5,
            partial_ratio: 0.5,
            hidden: 256,
            n_classes: 2,
            input_len: 384,
            variant: Variant::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.in_channels == 0 {
            return bad("in_channels must be positive".into());
        }
        if self.conv_channels < 2 || !self.conv_channels.is_multiple_of(2) {
            return bad(format!(
                "conv_channels must be even and >= 2, got {}",
                self.conv_channels
            ));
        }
        for (name, k) in [("kernel_a", self.kernel_a), ("kernel_b", self.kernel_b)] {
            if k % 2 == 0 {
                return bad(format!("{name} must be odd, got {k}"));
            }
        }
        if !(0.0..=1.0).contains(&self.partial_ratio) {
            return bad(format!(
                "partial_ratio must lie in [0, 1], got {}",
                self.partial_ratio
            ));
        }
        if self.hidden < 8 {
            return bad(format!("hidden must be >= 8, got {}", self.hidden));
        }
        if self.n_classes < 2 {
            return bad(format!("n_classes must be >= 2, got {}", self.n_classes));
        }
        if self.input_len == 0 {
            return bad("input_len must be positive".into());
        }
        Ok(())
    }

    pub fn branches(&self) -> usize {
        if self.variant == Variant::SingleBranch {
            1
        } else {
            2
        }
    }

    pub fn has_pointwise(&self) -> bool {
        self.variant != Variant::NoPointwise
    }

    pub fn has_depthwise(&self) -> bool {
        self.variant != Variant::NoDepthwise
    }

    pub fn has_hidden(&self) -> bool {
        self.variant != Variant::SingleFc
    }

    pub fn branch_kernel(&self, branch: usize) -> usize {
        if branch == 0 {
            self.kernel_a
        } else {
            self.kernel_b
        }
    }

    /// Channels produced by each branch.
    pub fn branch_width(&self) -> usize {
        if self.has_pointwise() {
            self.conv_channels
        } else {
            self.in_channels
        }
    }

    /// Channels after concatenating the branches. Branch outputs are
    /// interleaved: fused channel `t * branches + b` is channel `t` of
    /// branch `b`.
    pub fn fused_channels(&self) -> usize {
        self.branch_width() * self.branches()
    }

    /// Leading fused channels that pass through the partial convolution.
    pub fn partial_channels(&self) -> usize {
        if self.variant == Variant::NoPartialConv {
            0
        } else {
            (self.partial_ratio * self.fused_channels() as f64).floor() as usize
        }
    }

    /// Neurons in the hidden layer (0 when there is none).
    pub fn hidden_neurons(&self) -> usize {
        if self.has_hidden() {
            self.hidden
        } else {
            0
        }
    }

    /// Width of the features entering the output layer.
    pub fn head_inputs(&self) -> usize {
        if self.has_hidden() {
            self.hidden
        } else {
            self.fused_channels()
        }
    }

    /// `(branch, index within branch)` of a fused channel.
    pub fn split_channel(&self, fused: usize) -> (usize, usize) {
        (fused % self.branches(), fused / self.branches())
    }

    pub fn fused_index(&self, branch: usize, t: usize) -> usize {
        t * self.branches() + branch
    }
}

/// Optimiser and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.0015,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidConfig("Adam betas must be < 1".into()));
        }
        Ok(())
    }
}
