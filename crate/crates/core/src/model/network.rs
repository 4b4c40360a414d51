use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DenseActivation, GeomConfig, ModelConfig, VanillaConfig};
use crate::dataset::{CaseRecord, NormalizationStats, ResampledBatch};
use crate::error::{Error, Result};
use crate::geometry::{DesignParams, Vec3};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

/// Nodes per forward pass when predicting on a whole cloud.
pub const PREDICT_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerActivation {
    Identity,
    Tanh,
    Relu,
    /// `sin(ω·z)`.
    Sine(f64),
}

impl From<DenseActivation> for LayerActivation {
    fn from(a: DenseActivation) -> Self {
        match a {
            DenseActivation::Tanh => LayerActivation::Tanh,
            DenseActivation::Relu => LayerActivation::Relu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: LayerActivation,
}

impl Dense {
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let z = tape.affine(x, w, b)?;
        Ok(match self.activation {
            LayerActivation::Identity => z,
            LayerActivation::Tanh => tape.tanh(z),
            LayerActivation::Relu => tape.relu(z),
            LayerActivation::Sine(omega) => tape.sine(z, omega),
        })
    }
}

fn apply_stack(layers: &[Dense], tape: &mut Tape, store: &ParamStore, mut x: Var) -> Result<Var> {
    for layer in layers {
        x = layer.apply(tape, store, x)?;
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Glorot,
    Siren { omega0: f64 },
}

/// Weight bound of layer `index` in a stack.
fn init_bound(init: Init, index: usize, fan_in: usize, fan_out: usize) -> f64 {
    match init {
        Init::Glorot => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        Init::Siren { .. } if index == 0 => 1.0 / fan_in as f64,
        Init::Siren { omega0 } => (6.0 / fan_in as f64).sqrt() / omega0,
    }
}

struct StackSpec<'a> {
    prefix: &'a str,
    input: usize,
    widths: &'a [usize],
    hidden: LayerActivation,
    last: LayerActivation,
    init: Init,
}

fn build_stack(store: &mut ParamStore, rng: &mut ChaCha8Rng, spec: StackSpec) -> Vec<Dense> {
    let mut fan_in = spec.input;
    let mut layers = Vec::with_capacity(spec.widths.len());
    for (k, &w) in spec.widths.iter().enumerate() {
        let a = init_bound(spec.init, k, fan_in, w);
        let values = (0..fan_in * w).map(|_| rng.gen_range(-a..=a)).collect();
        let weight = store.add(
            format!("{}.{k}.weight", spec.prefix),
            Tensor::new(vec![fan_in, w], values).expect("layer shape"),
        );
        let bias = store.add(format!("{}.{k}.bias", spec.prefix), Tensor::zeros(&[w]));
        let activation = if k + 1 == spec.widths.len() {
            spec.last
        } else {
            spec.hidden
        };
        layers.push(Dense {
            weight,
            bias,
            activation,
        });
        fan_in = w;
    }
    layers
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    Geom {
        branch_stage1: Vec<Dense>,
        branch_stage2: Vec<Dense>,
        trunk_dense: Vec<Dense>,
        trunk_siren: Vec<Dense>,
    },
    Vanilla {
        branch: Vec<Dense>,
        trunk: Vec<Dense>,
    },
}

/// A Geom-DeepONet or a vanilla DeepONet with its parameters and scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    stats: Option<NormalizationStats>,
    layout: Layout,
}

fn geom_layout(cfg: &GeomConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Layout {
    let act = LayerActivation::from(cfg.dense_activation);
    let sine = LayerActivation::Sine(cfg.omega0);
    let branch_stage1 = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "branch_stage1",
            input: cfg.n_params,
            widths: &cfg.branch_stage1_widths,
            hidden: act,
            last: act,
            init: Init::Glorot,
        },
    );
    let branch_stage2 = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "branch_stage2",
            input: cfg.h,
            widths: &cfg.branch_stage2_widths,
            hidden: act,
            last: LayerActivation::Identity,
            init: Init::Glorot,
        },
    );
    let trunk_dense = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "trunk_dense",
            input: super::config::TRUNK_INPUTS,
            widths: &cfg.trunk_dense_widths,
            hidden: act,
            last: act,
            init: Init::Glorot,
        },
    );
    let trunk_siren = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "trunk_siren",
            input: cfg.h,
            widths: &cfg.trunk_siren_widths,
            hidden: sine,
            last: sine,
            init: Init::Siren { omega0: cfg.omega0 },
        },
    );
    Layout::Geom {
        branch_stage1,
        branch_stage2,
        trunk_dense,
        trunk_siren,
    }
}

fn vanilla_layout(cfg: &VanillaConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Layout {
    let act = LayerActivation::from(cfg.dense_activation);
    let branch = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "branch",
            input: cfg.n_params,
            widths: &cfg.branch_widths,
            hidden: act,
            last: LayerActivation::Identity,
            init: Init::Glorot,
        },
    );
    let trunk = build_stack(
        store,
        rng,
        StackSpec {
            prefix: "trunk",
            input: super::config::VANILLA_TRUNK_INPUTS,
            widths: &cfg.trunk_widths,
            hidden: act,
            last: act,
            init: Init::Glorot,
        },
    );
    Layout::Vanilla { branch, trunk }
}

impl Model {
    /// Fresh parameters drawn from a generator seeded with `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let layout = match &config {
            ModelConfig::Geom(g) => geom_layout(g, &mut store, &mut rng),
            ModelConfig::Vanilla(v) => vanilla_layout(v, &mut store, &mut rng),
        };
        debug_assert_eq!(store.scalar_count(), config.param_count());
        log::info!(
            "{} model with {} trainable parameters",
            config.architecture(),
            store.scalar_count()
        );
        Ok(Self {
            config,
            store,
            stats: None,
            layout,
        })
    }

    pub fn init_geom(config: GeomConfig, seed: u64) -> Result<Self> {
        Self::init(ModelConfig::Geom(config), seed)
    }

    pub fn init_vanilla(config: VanillaConfig, seed: u64) -> Result<Self> {
        Self::init(ModelConfig::Vanilla(config), seed)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn stats(&self) -> Option<&NormalizationStats> {
        self.stats.as_ref()
    }

    pub fn set_stats(&mut self, stats: NormalizationStats) -> Result<()> {
        if stats.n_params() != self.config.n_params() || stats.c() != self.config.c() {
            return Err(Error::Usage(format!(
                "stats for {} parameters and {} components do not fit a model with {} and {}",
                stats.n_params(),
                stats.c(),
                self.config.n_params(),
                self.config.c()
            )));
        }
        self.stats = Some(stats);
        Ok(())
    }

    pub fn c(&self) -> usize {
        self.config.c()
    }

    /// Records the scaled forward pass; returns a `b×i×c` node.
    pub fn forward(&self, tape: &mut Tape, branch: Var, trunk: Var) -> Result<Var> {
        let (bs, ts) = (tape.value(branch).shape().to_vec(), tape.value(trunk).shape().to_vec());
        let want = self.config.trunk_inputs();
        if bs.len() != 2 || ts.len() != 3 || ts[2] != want || bs[0] != ts[0] || bs[1] != self.config.n_params() {
            return Err(Error::dim(self.config.architecture(), &bs, &ts));
        }
        let (b, i) = (ts[0], ts[1]);
        let store = &self.store;
        match (&self.layout, &self.config) {
            (
                Layout::Geom {
                    branch_stage1,
                    branch_stage2,
                    trunk_dense,
                    trunk_siren,
                },
                ModelConfig::Geom(cfg),
            ) => {
                let b_alpha = apply_stack(branch_stage1, tape, store, branch)?;
                let t_alpha = apply_stack(trunk_dense, tape, store, trunk)?;
                let fused = tape.fuse(b_alpha, t_alpha)?;
                let t_beta = apply_stack(trunk_siren, tape, store, fused)?;
                let t_beta = tape.reshape(t_beta, &[b, i, cfg.h, cfg.c])?;
                let b_beta = apply_stack(branch_stage2, tape, store, b_alpha)?;
                let b_beta = tape.reshape(b_beta, &[b, cfg.h, cfg.c])?;
                tape.contract_vector(b_beta, t_beta)
            }
            (Layout::Vanilla { branch: bl, trunk: tl }, ModelConfig::Vanilla(_)) => {
                let bv = apply_stack(bl, tape, store, branch)?;
                let tv = apply_stack(tl, tape, store, trunk)?;
                let out = tape.dot_hidden(bv, tv)?;
                tape.reshape(out, &[b, i, 1])
            }
            _ => unreachable!("layout always matches config"),
        }
    }

    /// Scaled outputs for plain tensors, without gradient bookkeeping.
    pub fn forward_scaled(&self, branch: &Tensor, trunk: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bv = tape.constant(branch.clone());
        let tv = tape.constant(trunk.clone());
        let out = self.forward(&mut tape, bv, tv)?;
        Ok(tape.value(out).clone())
    }

    /// Scaled-space MSE of one batch, recorded on `tape`.
    pub fn batch_loss(&self, tape: &mut Tape, batch: &ResampledBatch) -> Result<Var> {
        let branch = tape.constant(batch.branch_inputs.clone());
        let trunk = match self.config {
            ModelConfig::Geom(_) => batch.trunk_inputs.clone(),
            ModelConfig::Vanilla(_) => batch.coordinates(),
        };
        let trunk = tape.constant(trunk);
        let target = tape.constant(batch.targets.clone());
        let pred = self.forward(tape, branch, trunk)?;
        tape.mse(pred, target)
    }

    /// Per-component scaled MSE of one batch.
    pub fn component_losses(&self, batch: &ResampledBatch) -> Result<Vec<f64>> {
        let trunk = match self.config {
            ModelConfig::Geom(_) => batch.trunk_inputs.clone(),
            ModelConfig::Vanilla(_) => batch.coordinates(),
        };
        let pred = self.forward_scaled(&batch.branch_inputs, &trunk)?;
        let c = self.c();
        let mut sums = vec![0.0; c];
        for (p, t) in pred.data().chunks_exact(c).zip(batch.targets.data().chunks_exact(c)) {
            for j in 0..c {
                sums[j] += (p[j] - t[j]).powi(2);
            }
        }
        let rows = (pred.numel() / c) as f64;
        Ok(sums.into_iter().map(|s| s / rows).collect())
    }

    fn fitted_stats(&self) -> Result<&NormalizationStats> {
        self.stats
            .as_ref()
            .ok_or_else(|| Error::Usage("model has no fitted normalization stats".into()))
    }

    /// Descaled `n×c` predictions at arbitrary nodes of one design.
    pub fn predict_points(&self, params: &DesignParams, points: &[Vec3], sdf: &[f64]) -> Result<Vec<f64>> {
        let stats = self.fitted_stats()?;
        if points.len() != sdf.len() {
            return Err(Error::Usage(format!(
                "{} points but {} signed distances",
                points.len(),
                sdf.len()
            )));
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let width = self.config.trunk_inputs();
        let branch = Tensor::new(vec![1, stats.n_params()], stats.scale_branch(params)?)?;
        let mut out = Vec::with_capacity(points.len() * self.c());
        for (pts, sds) in points.chunks(PREDICT_CHUNK).zip(sdf.chunks(PREDICT_CHUNK)) {
            let mut rows = Vec::with_capacity(pts.len() * width);
            for (p, s) in pts.iter().zip(sds) {
                rows.extend_from_slice(&stats.trunk_row(*p, *s)[..width]);
            }
            let trunk = Tensor::new(vec![1, pts.len(), width], rows)?;
            let mut pred = self.forward_scaled(&branch, &trunk)?.into_data();
            stats.descale_field_buffer(&mut pred);
            out.extend(pred);
        }
        Ok(out)
    }

    /// Descaled `n×c` predictions on every node of `case`.
    pub fn predict_case(&self, case: &CaseRecord) -> Result<Vec<f64>> {
        self.predict_points(&case.params, &case.points, &case.sdf)
    }
}
