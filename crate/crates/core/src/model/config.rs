use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How an attention stage groups tokens across channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// Each channel attends only within itself.
    Independent,
    /// Tokens of all channels are attended jointly.
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOrder {
    IntegratedFirst,
    CointegratedFirst,
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Independent => "ci",
            ChannelMode::Dependent => "cd",
        })
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ci" => Ok(ChannelMode::Independent),
            "cd" => Ok(ChannelMode::Dependent),
            _ => Err(Error::Config(format!(
                "channel mode must be ci or cd, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for BlockOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockOrder::IntegratedFirst => "integrated_first",
            BlockOrder::CointegratedFirst => "cointegrated_first",
        })
    }
}

impl FromStr for BlockOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrated_first" => Ok(BlockOrder::IntegratedFirst),
            "cointegrated_first" => Ok(BlockOrder::CointegratedFirst),
            _ => Err(Error::Config(format!(
                "block order must be integrated_first or cointegrated_first, got {s:?}"
            ))),
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_len: usize,
    pub output_len: usize,
    pub channels: usize,
    pub patch_len: usize,
    pub downsampled_patches: usize,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    pub n_integrated_layers: usize,
    pub n_cointegrated_layers: usize,
    pub n_heads: usize,
    pub detrend_kernel: usize,
    pub integrated_norm: bool,
    pub cointegrated_norm: bool,
    pub integrated_mode: ChannelMode,
    pub cointegrated_mode: ChannelMode,
    pub block_order: BlockOrder,
}

/// 25 when the patch is long enough, else the largest odd value not above `patch_len`.
pub fn default_detrend_kernel(patch_len: usize) -> usize {
    if patch_len >= 25 {
        25
    } else if patch_len % 2 == 1 {
        patch_len
    } else {
        patch_len.saturating_sub(1).max(1)
    }
}

impl ModelConfig {
    /// Default architecture for the given problem size: one layer per stage,
    /// `hidden_dim` 128, 8 heads.
    pub fn new(input_len: usize, output_len: usize, channels: usize, patch_len: usize) -> Self {
        let n = (input_len / patch_len.max(1)).max(1);
        ModelConfig {
            input_len,
            output_len,
            channels,
            patch_len,
            downsampled_patches: n,
            hidden_dim: 128,
            ff_dim: 128,
            n_integrated_layers: 1,
            n_cointegrated_layers: 1,
            n_heads: 8,
            detrend_kernel: default_detrend_kernel(patch_len),
            integrated_norm: true,
            cointegrated_norm: false,
            integrated_mode: ChannelMode::Independent,
            cointegrated_mode: ChannelMode::Dependent,
            block_order: BlockOrder::IntegratedFirst,
        }
    }

    /// Small configuration used throughout the tests: C=2, I=12, S=3, N=4, M=2, D=4.
    pub fn toy(output_len: usize) -> Self {
        ModelConfig {
            downsampled_patches: 2,
            hidden_dim: 4,
            ff_dim: 8,
            n_heads: 2,
            ..ModelConfig::new(12, output_len, 2, 3)
        }
    }

    pub fn num_patches(&self) -> usize {
        self.input_len / self.patch_len
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.channels == 0 || self.output_len == 0 || self.hidden_dim == 0 || self.ff_dim == 0 {
            return fail("channels, output_len, hidden_dim and ff_dim must be positive".into());
        }
        if self.patch_len == 0 || self.input_len < self.patch_len {
            return fail(format!(
                "input_len {} must be at least patch_len {}",
                self.input_len, self.patch_len
            ));
        }
        let n = self.num_patches();
        if self.downsampled_patches == 0 || self.downsampled_patches > n {
            return fail(format!(
                "downsampled_patches must be in 1..={n}, got {}",
                self.downsampled_patches
            ));
        }
        if self.n_heads == 0 || !self.hidden_dim.is_multiple_of(self.n_heads) {
            return fail(format!(
                "hidden_dim {} not divisible by n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if self.detrend_kernel.is_multiple_of(2) || self.detrend_kernel > self.patch_len {
            return fail(format!(
                "detrend_kernel must be odd and <= patch_len {}, got {}",
                self.patch_len, self.detrend_kernel
            ));
        }
        if self.n_integrated_layers == 0 && self.n_cointegrated_layers == 0 {
            return fail("at least one integrated or cointegrated layer is required".into());
        }
        Ok(())
    }

    /// Flat `key = value` view, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("input_len", self.input_len.to_string()),
            ("output_len", self.output_len.to_string()),
            ("channels", self.channels.to_string()),
            ("patch_len", self.patch_len.to_string()),
            ("downsampled_patches", self.downsampled_patches.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("ff_dim", self.ff_dim.to_string()),
            ("n_integrated_layers", self.n_integrated_layers.to_string()),
            (
                "n_cointegrated_layers",
                self.n_cointegrated_layers.to_string(),
            ),
            ("n_heads", self.n_heads.to_string()),
            ("detrend_kernel", self.detrend_kernel.to_string()),
            ("integrated_norm", self.integrated_norm.to_string()),
            ("cointegrated_norm", self.cointegrated_norm.to_string()),
            ("integrated_mode", self.integrated_mode.to_string()),
            ("cointegrated_mode", self.cointegrated_mode.to_string()),
            ("block_order", self.block_order.to_string()),
        ]
    }

    pub const KEYS: [&'static str; 16] = [
        "input_len",
        "output_len",
        "channels",
        "patch_len",
        "downsampled_patches",
        "hidden_dim",
        "ff_dim",
        "n_integrated_layers",
        "n_cointegrated_layers",
        "n_heads",
        "detrend_kernel",
        "integrated_norm",
        "cointegrated_norm",
        "integrated_mode",
        "cointegrated_mode",
        "block_order",
    ];

    /// Applies one `key = value` setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input_len" => self.input_len = parse_num(key, v)?,
            "output_len" => self.output_len = parse_num(key, v)?,
            "channels" => self.channels = parse_num(key, v)?,
            "patch_len" => self.patch_len = parse_num(key, v)?,
            "downsampled_patches" => self.downsampled_patches = parse_num(key, v)?,
            "hidden_dim" => self.hidden_dim = parse_num(key, v)?,
            "ff_dim" => self.ff_dim = parse_num(key, v)?,
            "n_integrated_layers" => self.n_integrated_layers = parse_num(key, v)?,
            "n_cointegrated_layers" => self.n_cointegrated_layers = parse_num(key, v)?,
            "n_heads" => self.n_heads = parse_num(key, v)?,
            "detrend_kernel" => self.detrend_kernel = parse_num(key, v)?,
            "integrated_norm" => self.integrated_norm = parse_bool(key, v)?,
            "cointegrated_norm" => self.cointegrated_norm = parse_bool(key, v)?,
            "integrated_mode" => self.integrated_mode = v.parse()?,
            "cointegrated_mode" => self.cointegrated_mode = v.parse()?,
            "block_order" => self.block_order = v.parse()?,
            _ => return Err(Error::Config(format!("unknown model key {key:?}"))),
        }
        Ok(())
    }
}

pub(crate) fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected a boolean, got {v:?}"
        ))),
    }
}

/// Per-dataset settings published with the reference model (input length 720).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub n_integrated_layers: usize,
    pub n_cointegrated_layers: usize,
    pub num_patches: usize,
    pub downsampled_patches: usize,
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    pub alpha: f64,
}

pub const PRESET_INPUT_LEN: usize = 720;

pub const DATASET_PRESETS: [DatasetPreset; 8] = [
    DatasetPreset {
        name: "ETTh1",
        n_integrated_layers: 3,
        n_cointegrated_layers: 0,
        num_patches: 30,
        downsampled_patches: 30,
        learning_rate: 2e-4,
        hidden_dim: 128,
        ff_dim: 128,
        alpha: 0.35,
    },
    DatasetPreset {
        name: "ETTh2",
        n_integrated_layers: 3,
        n_cointegrated_layers: 0,
        num_patches: 15,
        downsampled_patches: 15,
        learning_rate: 1e-4,
        hidden_dim: 128,
        ff_dim: 128,
        alpha: 0.35,
    },
    DatasetPreset {
        name: "ETTm1",
        n_integrated_layers: 3,
        n_cointegrated_layers: 0,
        num_patches: 15,
        downsampled_patches: 15,
        learning_rate: 2e-4,
        hidden_dim: 64,
        ff_dim: 128,
        alpha: 0.35,
    },
    DatasetPreset {
        name: "ETTm2",
        n_integrated_layers: 3,
        n_cointegrated_layers: 0,
        num_patches: 15,
        downsampled_patches: 15,
        learning_rate: 2e-4,
        hidden_dim: 64,
        ff_dim: 64,
        alpha: 0.35,
    },
    DatasetPreset {
        name: "Weather",
        n_integrated_layers: 1,
        n_cointegrated_layers: 1,
        num_patches: 30,
        downsampled_patches: 12,
        learning_rate: 1e-4,
        hidden_dim: 128,
        ff_dim: 128,
        alpha: 0.1,
    },
    DatasetPreset {
        name: "Solar",
        n_integrated_layers: 1,
        n_cointegrated_layers: 1,
        num_patches: 30,
        downsampled_patches: 12,
        learning_rate: 5e-4,
        hidden_dim: 128,
        ff_dim: 128,
        alpha: 0.05,
    },
    DatasetPreset {
        name: "Electricity",
        n_integrated_layers: 1,
        n_cointegrated_layers: 2,
        num_patches: 30,
        downsampled_patches: 4,
        learning_rate: 5e-4,
        hidden_dim: 512,
        ff_dim: 512,
        alpha: 0.2,
    },
    DatasetPreset {
        name: "Traffic",
        n_integrated_layers: 1,
        n_cointegrated_layers: 3,
        num_patches: 30,
        downsampled_patches: 8,
        learning_rate: 5e-4,
        hidden_dim: 512,
        ff_dim: 512,
        alpha: 0.35,
    },
];

impl DatasetPreset {
    pub fn find(name: &str) -> Option<&'static DatasetPreset> {
        DATASET_PRESETS
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn model_config(&self, output_len: usize, channels: usize) -> ModelConfig {
        let patch_len = PRESET_INPUT_LEN / self.num_patches;
        ModelConfig {
            downsampled_patches: self.downsampled_patches,
            hidden_dim: self.hidden_dim,
            ff_dim: self.ff_dim,
            n_integrated_layers: self.n_integrated_layers,
            n_cointegrated_layers: self.n_cointegrated_layers,
            ..ModelConfig::new(PRESET_INPUT_LEN, output_len, channels, patch_len)
        }
    }
}
