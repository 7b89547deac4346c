use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture switches used for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Feed the window straight into the convolution stage.
    pub no_gru: bool,
    /// Classify unit-level features without graph aggregation.
    pub no_agg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Unit-level feature width `Z`.
    pub feature_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub window: usize,
    pub kernel_width: usize,
    pub conv_channels: usize,
    pub gru_hidden: usize,
    pub attention_slope: f64,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 3,
            heads: 4,
            layers: 8,
            window: 20,
            kernel_width: 3,
            conv_channels: 8,
            gru_hidden: 8,
            attention_slope: 0.2,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("feature_dim", self.feature_dim),
            ("heads", self.heads),
            ("layers", self.layers),
            ("window", self.window),
            ("kernel_width", self.kernel_width),
            ("conv_channels", self.conv_channels),
            ("gru_hidden", self.gru_hidden),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("model {name} must be positive")));
        }
        if self.kernel_width > self.window {
            return Err(Error::InvalidArgument(format!(
                "kernel width {} exceeds window {}",
                self.kernel_width, self.window
            )));
        }
        if !(self.attention_slope >= 0.0 && self.attention_slope < 1.0) {
            return Err(Error::InvalidArgument(format!("attention slope {} not in [0, 1)", self.attention_slope)));
        }
        Ok(())
    }

    /// Width of aggregated features, `Z * H`.
    pub fn aggregated_dim(&self) -> usize {
        self.feature_dim * self.heads
    }

    pub fn conv_len(&self) -> usize {
        self.window + 1 - self.kernel_width
    }
}
