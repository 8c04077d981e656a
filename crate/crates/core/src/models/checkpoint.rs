//! Versioned JSON checkpoints.
//!
//! Layout:
//!
//! ```text
//! {
//!   "format": "boundary-checkpoint",
//!   "version": 1,
//!   "step": <u64>,
//!   "config": <any JSON>,
//!   "networks": {
//!     "<network>": [ {"name": "...", "shape": [..], "data": [..]}, ... ]
//!   }
//! }
//! ```
//!
//! Tensors are stored as row-major `f64` lists, written with round-trip
//! precision, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tensor::ParamStore;
use crate::{Error, Result, Tensor};

pub const CHECKPOINT_FORMAT: &str = "boundary-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub step: u64,
    pub config: serde_json::Value,
    pub networks: BTreeMap<String, Vec<NamedTensor>>,
}

impl Checkpoint {
    pub fn new(step: u64, config: serde_json::Value) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            step,
            config,
            networks: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, network: &str, store: &ParamStore) {
        let tensors = store
            .to_named()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                data: t.into_data(),
            })
            .collect();
        self.networks.insert(network.into(), tensors);
    }

    pub fn has(&self, network: &str) -> bool {
        self.networks.contains_key(network)
    }

    pub fn restore(&self, network: &str, store: &mut ParamStore) -> Result<()> {
        let tensors = self
            .networks
            .get(network)
            .ok_or_else(|| Error::config(format!("checkpoint has no network `{network}`")))?;
        let named = tensors
            .iter()
            .map(|t| Ok((t.name.clone(), Tensor::new(&t.shape, t.data.clone())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        store.load_named(&named)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::config(format!("not a checkpoint (format `{}`)", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
