use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, TrainConfig, TrainHistory, Trainer};
use crate::error::{Error, Result};
use crate::model::ModelFile;
use crate::tensor::{ParamStore, Tensor};

pub const TRAIN_FORMAT_VERSION: u32 = 1;

/// Parameters with the lowest selection loss seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct BestSnapshot {
    pub iteration: u64,
    pub loss: f64,
    pub parameters: ParamStore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestFile {
    pub iteration: u64,
    pub loss: f64,
    pub parameters: BTreeMap<String, Vec<f64>>,
}

impl BestFile {
    pub(crate) fn into_snapshot(mut self, like: &ParamStore) -> Result<BestSnapshot> {
        let mut parameters = like.clone();
        for p in parameters.iter_mut() {
            let values = self
                .parameters
                .remove(&p.name)
                .ok_or_else(|| Error::Resume(format!("best snapshot lacks '{}'", p.name)))?;
            p.value = Tensor::new(p.value.shape().to_vec(), values)
                .map_err(|e| Error::Resume(format!("best snapshot '{}': {e}", p.name)))?;
        }
        Ok(BestSnapshot {
            iteration: self.iteration,
            loss: self.loss,
            parameters,
        })
    }
}

/// Everything needed to continue a run exactly. Wall-clock data is left
/// out so that two identical runs write identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainCheckpoint {
    pub format_version: u32,
    pub iteration: u64,
    pub config: TrainConfig,
    pub model: ModelFile,
    pub adam: AdamState,
    pub history: TrainHistory,
    pub best: Option<BestFile>,
}

impl TrainCheckpoint {
    pub(crate) fn capture(t: &Trainer) -> Self {
        Self {
            format_version: TRAIN_FORMAT_VERSION,
            iteration: t.iteration,
            config: t.cfg.clone(),
            model: ModelFile::from_model(&t.model),
            adam: t.adam.clone(),
            history: t.history.clone(),
            best: t.best.as_ref().map(|b| BestFile {
                iteration: b.iteration,
                loss: b.loss,
                parameters: b
                    .parameters
                    .iter()
                    .map(|p| (p.name.clone(), p.value.data().to_vec()))
                    .collect(),
            }),
        }
    }
}

pub fn save_train_checkpoint(ckpt: &TrainCheckpoint, path: &Path) -> Result<()> {
    let text = serde_json::to_string(ckpt)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_train_checkpoint(path: &Path) -> Result<TrainCheckpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: TrainCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Resume(format!("{}: {e}", path.display())))?;
    if ckpt.format_version != TRAIN_FORMAT_VERSION {
        return Err(Error::Resume(format!(
            "checkpoint format {} is not supported",
            ckpt.format_version
        )));
    }
    Ok(ckpt)
}
