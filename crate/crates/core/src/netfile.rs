//! The JSON network-definition format.
//!
//! ```json
//! {
//!   "registry": ["add", "const:u"],
//!   "constants": {"u": {"a": {"b": 1.0}}},
//!   "matrix": { ... depth-6 weight tree ... },
//!   "init_outputs": {"add/Self": {"single": { ... }}},
//!   "feeds": {"identity/in1": [{"single": 1.0}, {"single": 2.0}]},
//!   "self": "add/Self/single",
//!   "seed": 0
//! }
//! ```
//!
//! `registry` names the activation types available to the network: the
//! built-ins by name, plus `const:<x>` for every `<x>` defined under
//! `constants`. `init_outputs` seeds neuron outputs at step 0. `feeds`
//! drives neuron outputs from per-step value lists (zero past the end).
//! `self`, when present, designates the output adopted as the network
//! matrix after every step.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{NeuronTypeRegistry, CONST_PREFIX};
use crate::engine::{
    AddressError, EngineState, InputFeed, MatrixDepthError, NetworkMatrix, NeuronAddress, NeuronId,
};
use crate::vspace::PTVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NetworkFile {
    #[serde(default)]
    pub registry: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, PTVector>,
    pub matrix: PTVector,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub init_outputs: BTreeMap<String, PTVector>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub feeds: BTreeMap<String, Vec<PTVector>>,
    #[serde(rename = "self", default, skip_serializing_if = "Option::is_none")]
    pub self_address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum NetworkFileError {
    #[error("cannot read network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("network file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Matrix(#[from] MatrixDepthError),
    #[error("{0}")]
    Address(#[from] AddressError),
    #[error("unknown neuron type `{0}` in registry list")]
    UnknownType(String),
    #[error("registry names `{CONST_PREFIX}{0}` but `constants` does not define `{0}`")]
    MissingConstant(String),
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<Self, NetworkFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, NetworkFileError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn from_path(path: impl AsRef<FsPath>) -> Result<Self, NetworkFileError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network files serialize")
    }

    /// Validates the definition and builds a runnable engine. The random
    /// seed comes from the file (0 when absent); epsilon is the default.
    /// Use [`EngineState::with_seed`]/[`EngineState::with_epsilon`] on the
    /// result to override either.
    pub fn instantiate(&self) -> Result<EngineState, NetworkFileError> {
        let matrix = NetworkMatrix::new(self.matrix.clone())?;

        let builtins = NeuronTypeRegistry::with_builtins();
        let mut registry = NeuronTypeRegistry::new();
        for (name, value) in &self.constants {
            registry.register_constant(name, value.clone());
        }
        for name in &self.registry {
            if let Some(builtin) = builtins.get(name) {
                registry.register(builtin.clone());
            } else if let Some(suffix) = name.strip_prefix(CONST_PREFIX) {
                if !registry.contains(name) {
                    return Err(NetworkFileError::MissingConstant(suffix.to_string()));
                }
            } else {
                return Err(NetworkFileError::UnknownType(name.clone()));
            }
        }

        let mut state = EngineState::new(matrix, registry).with_seed(self.seed.unwrap_or(0));
        if let Some(text) = &self.self_address {
            let address: NeuronAddress = text.parse()?;
            state = state.with_self_address(address);
        }
        for (key, value) in &self.init_outputs {
            state.set_output(NeuronId::parse(key)?, value.clone());
        }
        for (key, values) in &self.feeds {
            state.add_feed(NeuronId::parse(key)?, InputFeed::new(values.clone()));
        }
        Ok(state)
    }
}
