//! JSON checkpoints: config, named parameter tensors, the vocabulary digest
//! and, optionally, the optimiser state needed to resume training.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

use super::config::ModelConfig;
use super::train::TrainerState;
use super::QualityModel;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub params: Vec<NamedTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trainer: Option<TrainerState>,
}

impl Checkpoint {
    pub fn from_model(model: &QualityModel, trainer: Option<&TrainerState>) -> Self {
        let mut params = Vec::new();
        model.params().visit(&mut |name, t| {
            params.push(NamedTensor {
                name,
                tensor: t.clone(),
            })
        });
        Self {
            format_version: FORMAT_VERSION,
            config: model.config().clone(),
            vocab_hash: model.vocab_hash().to_string(),
            params,
            trainer: trainer.cloned(),
        }
    }

    /// Rebuilds the model, refusing a vocabulary whose digest differs from
    /// the one the parameters were trained against.
    pub fn into_model(self, vocab: &Vocabulary) -> Result<(QualityModel, Option<TrainerState>)> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint format {}",
                self.format_version
            )));
        }
        let found = vocab.hash();
        if found != self.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.vocab_hash,
                found,
            });
        }
        let mut model = QualityModel::new(self.config, vocab)?;
        let names = model.params().names();
        let got: Vec<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        if names.iter().map(String::as_str).ne(got.iter().copied()) {
            return Err(Error::InvalidConfig(
                "checkpoint tensors do not match the model layout".into(),
            ));
        }
        let values = self.params.into_iter().map(|p| p.tensor).collect();
        let params = model.params().with_values(values).ok_or_else(|| {
            Error::InvalidConfig("checkpoint tensor shapes do not match the config".into())
        })?;
        if !params.is_finite() {
            return Err(Error::InvalidConfig("checkpoint holds non-finite values".into()));
        }
        model.set_params(params);
        Ok((model, self.trainer))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
