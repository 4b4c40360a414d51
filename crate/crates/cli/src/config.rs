//! JSON run configs with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use geom_deeponet::dataset::GenConfig;
use geom_deeponet::geometry::ShapeFamily;
use geom_deeponet::model::{GeomConfig, ModelConfig, VanillaConfig, DEFAULT_HIDDEN};
use geom_deeponet::training::TrainConfig;
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Reads a JSON object from `path`, or an empty object when none is given.
pub fn load_object(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::usage(format!("config {} is not a JSON object", path.display())));
    }
    Ok(value)
}

/// Sets the dotted `key` to `value`, creating intermediate objects.
pub fn set(config: &mut Value, key: &str, value: impl Serialize) -> Result<(), CliError> {
    let value = serde_json::to_value(value).map_err(|e| CliError::usage(e.to_string()))?;
    let mut node = config;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::usage(format!("config field above '{part}' is not an object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

pub fn set_opt<T: Serialize>(config: &mut Value, key: &str, value: Option<T>) -> Result<(), CliError> {
    match value {
        Some(v) => set(config, key, v),
        None => Ok(()),
    }
}

pub fn finish<T: DeserializeOwned>(config: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(config).map_err(|e| CliError::usage(format!("{what} config: {e}")))
}

pub fn gen_config(config: Value) -> Result<GenConfig, CliError> {
    finish(config, "gen")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Geom,
    Vanilla,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Reference,
    Compact,
}

/// Either a named preset or an explicit layer layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelChoice {
    pub architecture: Architecture,
    pub preset: Preset,
    pub hidden: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
}

impl Default for ModelChoice {
    fn default() -> Self {
        Self {
            architecture: Architecture::Geom,
            preset: Preset::Reference,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
            config: None,
        }
    }
}

impl ModelChoice {
    pub fn resolve(&self, n_params: usize, c: usize) -> Result<ModelConfig, CliError> {
        let cfg = match (&self.config, self.architecture, self.preset) {
            (Some(cfg), _, _) => cfg.clone(),
            (None, Architecture::Geom, Preset::Reference) => ModelConfig::Geom(GeomConfig::reference(n_params, c)),
            (None, Architecture::Geom, Preset::Compact) => {
                ModelConfig::Geom(GeomConfig::compact(n_params, c, self.hidden))
            }
            (None, Architecture::Vanilla, _) if c != 1 => {
                return Err(CliError::usage(format!("vanilla models predict one component, dataset has {c}")))
            }
            (None, Architecture::Vanilla, Preset::Reference) => ModelConfig::Vanilla(VanillaConfig::reference(n_params)),
            (None, Architecture::Vanilla, Preset::Compact) => {
                ModelConfig::Vanilla(VanillaConfig::compact(n_params, self.hidden))
            }
        };
        cfg.validate()?;
        if cfg.n_params() != n_params || cfg.c() != c {
            return Err(CliError::usage(format!(
                "model expects {} parameters and {} components, dataset has {n_params} and {c}",
                cfg.n_params(),
                cfg.c()
            )));
        }
        Ok(cfg)
    }
}

/// Everything `train` needs; written back verbatim next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub split: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<ShapeFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub train: TrainConfig,
    /// Write a resumable checkpoint every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (what, path) in [("dataset", &self.dataset), ("split file", &self.split)] {
            if !path.exists() {
                return Err(CliError::usage(format!("{what} {} does not exist", path.display())));
            }
        }
        if self.checkpoint_every == Some(0) {
            return Err(CliError::usage("checkpoint_every must be at least 1"));
        }
        self.train.validate()?;
        Ok(())
    }
}
