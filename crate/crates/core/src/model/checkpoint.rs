//! JSON model files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::dataset::NormalizationStats;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// On-disk form of a [`Model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub param_count: usize,
    pub config: ModelConfig,
    pub stats: Option<NormalizationStats>,
    pub parameters: BTreeMap<String, ParamEntry>,
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        let parameters = model
            .params()
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    ParamEntry {
                        shape: p.value.shape().to_vec(),
                        values: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            param_count: model.param_count(),
            config: model.config().clone(),
            stats: model.stats().cloned(),
            parameters,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Load(format!(
                "format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.config.validate().map_err(|e| Error::Load(e.to_string()))?;
        let expected = self.config.param_count();
        if self.param_count != expected {
            return Err(Error::Load(format!(
                "header says {} parameters, configuration implies {expected}",
                self.param_count
            )));
        }
        let stored: usize = self.parameters.values().map(|e| e.values.len()).sum();
        if stored != expected {
            return Err(Error::Load(format!(
                "file holds {stored} parameter values, configuration implies {expected}"
            )));
        }
        let mut model = Model::init(self.config, 0)?;
        let mut parameters = self.parameters;
        for slot in model.params_mut().iter_mut() {
            let entry = parameters
                .remove(&slot.name)
                .ok_or_else(|| Error::Load(format!("missing parameter '{}'", slot.name)))?;
            if entry.shape != slot.value.shape() {
                return Err(Error::Load(format!(
                    "parameter '{}' has shape {:?}, expected {:?}",
                    slot.name,
                    entry.shape,
                    slot.value.shape()
                )));
            }
            slot.value = Tensor::new(entry.shape, entry.values).map_err(|e| Error::Load(e.to_string()))?;
        }
        if let Some(name) = parameters.keys().next() {
            return Err(Error::Load(format!("unexpected parameter '{name}'")));
        }
        if let Some(stats) = self.stats {
            model.set_stats(stats).map_err(|e| Error::Load(e.to_string()))?;
        }
        Ok(model)
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&ModelFile::from_model(model))? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    file.into_model()
}
