use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// JSON container of named tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_store<T: Real>(store: &ParamStore<T>) -> Self {
        let tensors = store
            .iter()
            .map(|(name, p)| NamedTensor { name: name.clone(), shape: p.value.shape().to_vec(), data: p.value.to_f64_vec() })
            .collect();
        Self { format_version: CHECKPOINT_FORMAT_VERSION, tensors }
    }

    pub fn to_store<T: Real>(&self) -> Result<ParamStore<T>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Validation(format!("unsupported checkpoint format version {}", self.format_version)));
        }
        let mut store = ParamStore::new();
        for t in &self.tensors {
            store.insert(t.name.clone(), Tensor::from_f64(t.shape.clone(), &t.data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
