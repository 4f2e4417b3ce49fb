use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters of the quality model and its training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Item-id embedding width.
    pub embed_dim: usize,
    /// Category embedding width.
    pub cate_dim: usize,
    /// Decoder hidden width; the softmax rows have `hidden_dim + 1` entries.
    pub hidden_dim: usize,
    /// Hidden width of the feature transform that builds softmax rows.
    pub fa_hidden_dim: usize,
    pub cnn_windows: Vec<usize>,
    pub cnn_channels: usize,
    pub decoder_layers: usize,
    /// Build softmax rows from item features (`true`) or from a plain
    /// per-id table (`false`).
    pub feature_aware: bool,
    /// Negatives per decoding step for the sampled loss.
    pub n_neg_samples: usize,
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Only the most recent `max_context` history items are encoded.
    pub max_context: usize,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// Settings used for the full-size public benchmarks.
    pub fn full() -> Self {
        Self {
            embed_dim: 64,
            cate_dim: 64,
            hidden_dim: 64,
            fa_hidden_dim: 64,
            cnn_windows: vec![1, 2, 4, 8, 12, 16, 32, 64],
            cnn_channels: 12,
            decoder_layers: 2,
            feature_aware: true,
            n_neg_samples: 1024,
            l2_weight: 5e-5,
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 20,
            patience: 3,
            max_context: 64,
            init_std: 0.1,
            seed: 0,
        }
    }

    /// Small preset that trains on a synthetic corpus in a few minutes on one core.
    pub fn desk() -> Self {
        Self {
            embed_dim: 16,
            cate_dim: 8,
            hidden_dim: 32,
            fa_hidden_dim: 32,
            cnn_windows: vec![1, 2, 4, 8],
            cnn_channels: 8,
            decoder_layers: 1,
            feature_aware: true,
            n_neg_samples: 64,
            l2_weight: 1e-6,
            learning_rate: 5e-3,
            batch_size: 16,
            max_epochs: 16,
            patience: 3,
            max_context: 64,
            init_std: 0.1,
            seed: 0,
        }
    }

    /// Minimal dimensions for gradient checks and exhaustive oracles.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 4,
            cate_dim: 2,
            hidden_dim: 5,
            fa_hidden_dim: 4,
            cnn_windows: vec![1, 2],
            cnn_channels: 3,
            decoder_layers: 2,
            feature_aware: true,
            n_neg_samples: 3,
            l2_weight: 1e-3,
            learning_rate: 1e-2,
            batch_size: 2,
            max_epochs: 5,
            patience: 3,
            max_context: 64,
            init_std: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("cate_dim", self.cate_dim),
            ("hidden_dim", self.hidden_dim),
            ("fa_hidden_dim", self.fa_hidden_dim),
            ("cnn_channels", self.cnn_channels),
            ("decoder_layers", self.decoder_layers),
            ("n_neg_samples", self.n_neg_samples),
            ("batch_size", self.batch_size),
            ("max_context", self.max_context),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.cnn_windows.is_empty() || self.cnn_windows.contains(&0) {
            return Err(Error::InvalidConfig(
                "cnn_windows must be non-empty and positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.l2_weight >= 0.0 && self.init_std > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate and l2_weight must be non-negative, init_std positive".into(),
            ));
        }
        Ok(())
    }

    /// Width of one item feature vector: item embedding, category embedding,
    /// scaled log-price.
    pub fn feature_dim(&self) -> usize {
        self.embed_dim + self.cate_dim + 1
    }
}
