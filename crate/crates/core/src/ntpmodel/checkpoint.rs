use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::net::NtpModel;
use crate::error::NtpError;
use crate::numcore::Tensor;
use crate::program::REGISTRY_VERSION;

/// Serialized model: configuration plus every named parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub registry_version: u32,
    pub config: ModelConfig,
    pub params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn of(model: &NtpModel) -> Self {
        Checkpoint {
            registry_version: REGISTRY_VERSION,
            config: model.config.clone(),
            params: model.store.named().map(|(n, t)| (n.to_string(), t.clone())).collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, NtpError> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NtpError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn into_model(self) -> Result<NtpModel, NtpError> {
        if self.registry_version != REGISTRY_VERSION {
            return Err(NtpError::RegistryVersion { found: self.registry_version, expected: REGISTRY_VERSION });
        }
        let mut model = NtpModel::new(self.config)?;
        let params = self
            .params
            .into_iter()
            .map(|(n, t)| Ok((n, Tensor::new(t.shape().to_vec(), t.into_data())?)))
            .collect::<Result<BTreeMap<_, _>, NtpError>>()?;
        model.set_values(&params)?;
        Ok(model)
    }
}

/// Hex sha256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `model` to `path` and returns the file's sha256.
pub fn save_checkpoint(model: &NtpModel, path: &Path) -> Result<String, NtpError> {
    let bytes = Checkpoint::of(model).to_bytes()?;
    std::fs::write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Loads a model and returns it with the file's sha256.
pub fn load_checkpoint(path: &Path) -> Result<(NtpModel, String), NtpError> {
    let bytes = std::fs::read(path)?;
    let model = Checkpoint::from_bytes(&bytes)?.into_model()?;
    Ok((model, sha256_hex(&bytes)))
}
