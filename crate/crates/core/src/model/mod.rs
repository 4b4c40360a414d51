//! Geom-DeepONet and the vanilla DeepONet baseline.
//!
//! Geom-DeepONet: the branch is one dense stack tapped midway. Its first
//! stage `Bα` is fused with the dense trunk encoding `Tα` by an element-wise
//! product, the product runs through a SIREN stage to give `Tβ`, the branch
//! continues from `Bα` to `Bβ`, and the output contracts `Bβ` with `Tβ` over
//! the hidden index separately for every component.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{load_model, save_model, ModelFile, ParamEntry, MODEL_FORMAT_VERSION};
pub use config::{
    stack_param_count, DenseActivation, GeomConfig, ModelConfig, VanillaConfig, DEFAULT_HIDDEN,
    DEFAULT_OMEGA0, TRUNK_INPUTS, VANILLA_TRUNK_INPUTS,
};
pub use network::{Dense, LayerActivation, Model, PREDICT_CHUNK};

/// Closed-form trainable parameter count.
pub fn param_count(config: &ModelConfig) -> usize {
    config.param_count()
}
