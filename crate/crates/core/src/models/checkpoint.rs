use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelError, TrainHistory};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing model file: the architecture, normaliser and parameters
/// all live inside [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Model,
    pub config_hash: Option<String>,
    pub history: Option<TrainHistory>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self { version: CHECKPOINT_VERSION, model, config_hash: None, history: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        match v.get("version").and_then(|x| x.as_u64()) {
            Some(x) if x == CHECKPOINT_VERSION as u64 => {}
            Some(x) => return Err(ModelError::Checkpoint(format!("unsupported version {x}, expected {CHECKPOINT_VERSION}"))),
            None => return Err(ModelError::Checkpoint("missing version".into())),
        }
        serde_json::from_value(v).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}
