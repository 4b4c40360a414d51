use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonlinearity of the plain dense layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseActivation {
    #[default]
    Tanh,
    Relu,
}

/// Layer widths of a Geom-DeepONet.
///
/// Each list holds output widths; the input width of a stage is implied by
/// the stage before it. Stage 1 of the branch and the dense trunk stage end
/// at `h`, branch stage 2 and the SIREN stage end at `h·c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomConfig {
    pub n_params: usize,
    pub h: usize,
    pub c: usize,
    pub branch_stage1_widths: Vec<usize>,
    pub branch_stage2_widths: Vec<usize>,
    pub trunk_dense_widths: Vec<usize>,
    pub trunk_siren_widths: Vec<usize>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default)]
    pub dense_activation: DenseActivation,
}

pub const DEFAULT_OMEGA0: f64 = 30.0;
pub const DEFAULT_HIDDEN: usize = 32;
pub const TRUNK_INPUTS: usize = 4;
pub const VANILLA_TRUNK_INPUTS: usize = 3;

fn default_omega0() -> f64 {
    DEFAULT_OMEGA0
}

fn check_stage(name: &str, widths: &[usize], end: usize) -> Result<()> {
    match widths.last() {
        None => Err(Error::Config(format!("{name} needs at least one layer"))),
        Some(_) if widths.contains(&0) => Err(Error::Config(format!("{name} has a zero width"))),
        Some(&w) if w != end => Err(Error::Config(format!(
            "{name} must end at width {end}, ends at {w}"
        ))),
        _ => Ok(()),
    }
}

/// Weight and bias count of a chain of dense layers.
pub fn stack_param_count(input: usize, widths: &[usize]) -> usize {
    let mut fan_in = input;
    let mut total = 0;
    for &w in widths {
        total += fan_in * w + w;
        fan_in = w;
    }
    total
}

impl GeomConfig {
    /// Widths sized so that a four-parameter, single-output model has close
    /// to 25.5k trainable parameters with `h = 32`.
    pub fn reference(n_params: usize, c: usize) -> Self {
        let h = DEFAULT_HIDDEN;
        Self {
            n_params,
            h,
            c,
            branch_stage1_widths: vec![109, h],
            branch_stage2_widths: vec![h * c],
            trunk_dense_widths: vec![109, h],
            trunk_siren_widths: vec![99, 99, h * c],
            omega0: DEFAULT_OMEGA0,
            dense_activation: DenseActivation::Tanh,
        }
    }

    /// Every hidden layer `h` wide.
    pub fn compact(n_params: usize, c: usize, h: usize) -> Self {
        Self {
            n_params,
            h,
            c,
            branch_stage1_widths: vec![h, h],
            branch_stage2_widths: vec![h * c],
            trunk_dense_widths: vec![h, h],
            trunk_siren_widths: vec![h, h, h * c],
            omega0: DEFAULT_OMEGA0,
            dense_activation: DenseActivation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_params == 0 || self.h == 0 || self.c == 0 {
            return Err(Error::Config(format!(
                "n_params, h and c must be positive (got {}, {}, {})",
                self.n_params, self.h, self.c
            )));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::Config(format!("omega0 must be positive, got {}", self.omega0)));
        }
        let hc = self.h * self.c;
        check_stage("branch_stage1_widths", &self.branch_stage1_widths, self.h)?;
        check_stage("branch_stage2_widths", &self.branch_stage2_widths, hc)?;
        check_stage("trunk_dense_widths", &self.trunk_dense_widths, self.h)?;
        check_stage("trunk_siren_widths", &self.trunk_siren_widths, hc)
    }

    pub fn param_count(&self) -> usize {
        stack_param_count(self.n_params, &self.branch_stage1_widths)
            + stack_param_count(self.h, &self.branch_stage2_widths)
            + stack_param_count(TRUNK_INPUTS, &self.trunk_dense_widths)
            + stack_param_count(self.h, &self.trunk_siren_widths)
    }
}

/// Widths of the coordinate-only baseline; both stacks end at `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanillaConfig {
    pub n_params: usize,
    pub h: usize,
    pub branch_widths: Vec<usize>,
    pub trunk_widths: Vec<usize>,
    #[serde(default)]
    pub dense_activation: DenseActivation,
}

impl VanillaConfig {
    /// Close to 24k parameters for a four-parameter family.
    pub fn reference(n_params: usize) -> Self {
        let h = DEFAULT_HIDDEN;
        Self {
            n_params,
            h,
            branch_widths: vec![92, 92, h],
            trunk_widths: vec![92, 92, h],
            dense_activation: DenseActivation::Tanh,
        }
    }

    pub fn compact(n_params: usize, h: usize) -> Self {
        Self {
            n_params,
            h,
            branch_widths: vec![h, h, h],
            trunk_widths: vec![h, h, h],
            dense_activation: DenseActivation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_params == 0 || self.h == 0 {
            return Err(Error::Config(format!(
                "n_params and h must be positive (got {}, {})",
                self.n_params, self.h
            )));
        }
        check_stage("branch_widths", &self.branch_widths, self.h)?;
        check_stage("trunk_widths", &self.trunk_widths, self.h)
    }

    pub fn param_count(&self) -> usize {
        stack_param_count(self.n_params, &self.branch_widths)
            + stack_param_count(VANILLA_TRUNK_INPUTS, &self.trunk_widths)
    }
}

/// Either architecture's configuration, tagged in files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "snake_case")]
pub enum ModelConfig {
    Geom(GeomConfig),
    Vanilla(VanillaConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Geom(g) => g.validate(),
            ModelConfig::Vanilla(v) => v.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelConfig::Geom(g) => g.param_count(),
            ModelConfig::Vanilla(v) => v.param_count(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ModelConfig::Geom(g) => g.n_params,
            ModelConfig::Vanilla(v) => v.n_params,
        }
    }

    pub fn c(&self) -> usize {
        match self {
            ModelConfig::Geom(g) => g.c,
            ModelConfig::Vanilla(_) => 1,
        }
    }

    pub fn trunk_inputs(&self) -> usize {
        match self {
            ModelConfig::Geom(_) => TRUNK_INPUTS,
            ModelConfig::Vanilla(_) => VANILLA_TRUNK_INPUTS,
        }
    }

    pub fn architecture(&self) -> &'static str {
        match self {
            ModelConfig::Geom(_) => "geom",
            ModelConfig::Vanilla(_) => "vanilla",
        }
    }
}
