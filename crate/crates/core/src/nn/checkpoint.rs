use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DenseNet, NetworkSpec};
use crate::error::{Error, Result};

/// Serializable snapshot of a [`DenseNet`]: spec, flat parameters in layer
/// order, the initialization seed and the optimizer step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub spec: NetworkSpec,
    pub params: Vec<f64>,
    pub seed: u64,
    pub step: u64,
}

impl NetworkCheckpoint {
    pub fn capture(net: &DenseNet, seed: u64, step: u64) -> Self {
        NetworkCheckpoint {
            spec: net.spec().clone(),
            params: net.flat_params(),
            seed,
            step,
        }
    }

    pub fn restore(&self) -> Result<DenseNet> {
        let mut net = DenseNet::init(self.spec.clone(), self.seed)?;
        net.set_flat_params(&self.params)?;
        if !net.is_finite() {
            return Err(Error::Contract("checkpoint holds non-finite parameters".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
