//! Mini-batch Adam training with inverse-time learning-rate decay.
//!
//! A run is a pure function of its configuration, the initial model, and
//! the case lists: resampled arrays are built once from fixed seeds, and the
//! batch drawn at iteration `t` comes from stream `t` of a fixed generator,
//! so a run resumed from a checkpoint continues bit for bit.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_train_checkpoint, save_train_checkpoint, BestFile, BestSnapshot, TrainCheckpoint};

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{fit_stats, CaseRecord, NormalizationStats, ResampledSet};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{ParamStore, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_coefficient: f64,
    pub iterations: u64,
    pub seed: u64,
    pub resample_n: usize,
    pub eval_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            lr0: 2e-3,
            decay_coefficient: 2e-4,
            iterations: 20_000,
            seed: 0,
            resample_n: 256,
            eval_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_coefficient >= 0.0 && self.decay_coefficient.is_finite()) {
            return Err(Error::Config(format!(
                "decay_coefficient must be non-negative, got {}",
                self.decay_coefficient
            )));
        }
        if self.resample_n == 0 || self.eval_every == 0 {
            return Err(Error::Config("resample_n and eval_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Everything except the iteration budget must agree to resume.
    fn resume_mismatch(&self, other: &TrainConfig) -> Option<&'static str> {
        if self.batch_size != other.batch_size {
            Some("batch_size")
        } else if self.lr0.to_bits() != other.lr0.to_bits() {
            Some("lr0")
        } else if self.decay_coefficient.to_bits() != other.decay_coefficient.to_bits() {
            Some("decay_coefficient")
        } else if self.seed != other.seed {
            Some("seed")
        } else if self.resample_n != other.resample_n {
            Some("resample_n")
        } else if self.eval_every != other.eval_every {
            Some("eval_every")
        } else {
            None
        }
    }
}

/// `lr0 / (1 + decay·t)`.
pub fn lr_at(t: u64, cfg: &TrainConfig) -> f64 {
    cfg.lr0 / (1.0 + cfg.decay_coefficient * t as f64)
}

/// Seeds for the independent random streams of one run.
fn stream_seed(seed: u64, purpose: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(purpose)
}
const TRAIN_RESAMPLE: u64 = 1;
const TEST_RESAMPLE: u64 = 2;
const BATCHES: u64 = 3;

/// Case indices drawn for iteration `t`, uniformly with replacement.
pub fn batch_indices(cfg: &TrainConfig, t: u64, n_cases: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, BATCHES));
    rng.set_stream(t);
    (0..cfg.batch_size).map(|_| rng.gen_range(0..n_cases)).collect()
}

/// Losses after `iteration` optimizer steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: u64,
    /// Scaled MSE over the whole resampled training set.
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub train_component_loss: Vec<f64>,
    pub test_component_loss: Option<Vec<f64>>,
    /// Rate used for the next step.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    pub fn first(&self) -> Option<&HistoryRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }
}

/// Wall-clock seconds since the trainer was created or resumed, keyed by
/// eval iteration. Kept out of histories and checkpoints so that those stay
/// reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub records: Vec<(u64, f64)>,
}

impl Timings {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for (it, secs) in &self.records {
            writeln!(f, "{{\"iteration\":{it},\"wall_seconds\":{secs}}}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    model: Model,
    adam: AdamState,
    iteration: u64,
    train_ids: Vec<String>,
    train_set: ResampledSet,
    test_set: Option<ResampledSet>,
    history: TrainHistory,
    best: Option<BestSnapshot>,
    timings: Timings,
    started: Instant,
}

fn prepare(
    cfg: &TrainConfig,
    stats: &NormalizationStats,
    train: &[CaseRecord],
    test: &[CaseRecord],
) -> Result<(ResampledSet, Option<ResampledSet>)> {
    let train_set = ResampledSet::build(train, stats, cfg.resample_n, stream_seed(cfg.seed, TRAIN_RESAMPLE))?;
    let test_set = if test.is_empty() {
        None
    } else {
        Some(ResampledSet::build(test, stats, cfg.resample_n, stream_seed(cfg.seed, TEST_RESAMPLE))?)
    };
    Ok((train_set, test_set))
}

impl Trainer {
    /// Fits scaling on `train`, resamples both lists, and records the
    /// iteration-0 losses.
    pub fn new(mut model: Model, train: &[CaseRecord], test: &[CaseRecord], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let stats = fit_stats(train)?;
        model.set_stats(stats.clone())?;
        let (train_set, test_set) = prepare(&cfg, &stats, train, test)?;
        let adam = AdamState::new(model.params());
        let mut trainer = Self {
            cfg,
            model,
            adam,
            iteration: 0,
            train_ids: train.iter().map(|c| c.id.clone()).collect(),
            train_set,
            test_set,
            history: TrainHistory::default(),
            best: None,
            timings: Timings::default(),
            started: Instant::now(),
        };
        trainer.evaluate()?;
        Ok(trainer)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn timings(&self) -> &Timings {
        &self.timings
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn train_set(&self) -> &ResampledSet {
        &self.train_set
    }

    pub fn test_set(&self) -> Option<&ResampledSet> {
        self.test_set.as_ref()
    }

    /// Model carrying the parameters with the lowest recorded test loss
    /// (train loss when there is no test set).
    pub fn best_model(&self) -> Model {
        let mut m = self.model.clone();
        if let Some(b) = &self.best {
            copy_values(m.params_mut(), &b.parameters);
        }
        m
    }

    pub fn best(&self) -> Option<&BestSnapshot> {
        self.best.as_ref()
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// Scaled loss of the batch for iteration `t` under the current
    /// parameters, without updating anything.
    pub fn batch_loss(&self, t: u64) -> Result<f64> {
        let idx = batch_indices(&self.cfg, t, self.train_set.n_cases);
        let batch = self.train_set.batch(&idx)?;
        let mut tape = Tape::new();
        let loss = self.model.batch_loss(&mut tape, &batch)?;
        tape.value(loss).item()
    }

    /// One optimizer step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let t = self.iteration;
        let idx = batch_indices(&self.cfg, t, self.train_set.n_cases);
        let batch = self.train_set.batch(&idx)?;
        let mut tape = Tape::new();
        let loss = self.model.batch_loss(&mut tape, &batch)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            let ids: Vec<&str> = idx.iter().map(|&i| self.train_ids[i].as_str()).collect();
            return Err(Error::Training(format!(
                "non-finite loss {value} at iteration {t} on cases {ids:?}"
            )));
        }
        tape.backward(loss, self.model.params_mut())?;
        adam_step(self.model.params_mut(), &mut self.adam, lr_at(t, &self.cfg))
            .map_err(|e| Error::Training(format!("iteration {t}: {e}")))?;
        self.iteration += 1;
        Ok(value)
    }

    fn set_losses(&self, set: &ResampledSet) -> Result<(f64, Vec<f64>)> {
        // Per-case evaluation keeps memory bounded; the components are
        // averaged with equal case weights, which equals the pooled mean
        // because every case has the same N.
        let c = self.model.c();
        let mut acc = vec![0.0; c];
        for i in 0..set.n_cases {
            let losses = self.model.component_losses(&set.batch(&[i])?)?;
            for (a, l) in acc.iter_mut().zip(losses) {
                *a += l;
            }
        }
        let comps: Vec<f64> = acc.into_iter().map(|a| a / set.n_cases as f64).collect();
        let total = comps.iter().sum::<f64>() / c as f64;
        Ok((total, comps))
    }

    fn evaluate(&mut self) -> Result<()> {
        let (train_loss, train_comp) = self.set_losses(&self.train_set)?;
        let test = match &self.test_set {
            Some(s) => Some(self.set_losses(s)?),
            None => None,
        };
        if !train_loss.is_finite() || test.as_ref().is_some_and(|(l, _)| !l.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite evaluation loss at iteration {}",
                self.iteration
            )));
        }
        let record = HistoryRecord {
            iteration: self.iteration,
            train_loss,
            test_loss: test.as_ref().map(|t| t.0),
            train_component_loss: train_comp,
            test_component_loss: test.map(|t| t.1),
            lr: lr_at(self.iteration, &self.cfg),
        };
        let score = record.test_loss.unwrap_or(record.train_loss);
        if self.best.as_ref().map_or(true, |b| score < b.loss) {
            self.best = Some(BestSnapshot {
                iteration: self.iteration,
                loss: score,
                parameters: self.model.params().clone(),
            });
        }
        let secs = self.started.elapsed().as_secs_f64();
        log::info!(
            "iteration {:>7}  train {:.6e}  test {}  lr {:.3e}  {:.1}s",
            record.iteration,
            record.train_loss,
            record.test_loss.map_or("-".into(), |l| format!("{l:.6e}")),
            record.lr,
            secs
        );
        self.timings.records.push((self.iteration, secs));
        self.history.records.push(record);
        Ok(())
    }

    /// Steps until `target` iterations are done, recording losses at every
    /// multiple of `eval_every` and at the final iteration. Stopping early
    /// records nothing extra, so a resumed run writes the same history as an
    /// uninterrupted one.
    pub fn run_until(&mut self, target: u64) -> Result<()> {
        while self.iteration < target {
            self.step()?;
            if self.iteration % self.cfg.eval_every == 0 || self.iteration == self.cfg.iterations {
                self.evaluate()?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.cfg.iterations)
    }

    pub fn checkpoint(&self) -> TrainCheckpoint {
        TrainCheckpoint::capture(self)
    }

    /// Continues a checkpointed run. `cfg` may raise the iteration budget;
    /// every other setting must match the checkpoint.
    pub fn resume(ckpt: TrainCheckpoint, train: &[CaseRecord], test: &[CaseRecord], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(field) = ckpt.config.resume_mismatch(&cfg) {
            return Err(Error::Resume(format!("{field} differs from the checkpoint")));
        }
        let model = ckpt.model.into_model().map_err(|e| Error::Resume(e.to_string()))?;
        let stats = fit_stats(train)?;
        if model.stats() != Some(&stats) {
            return Err(Error::Resume(
                "training cases differ from those the checkpoint was trained on".into(),
            ));
        }
        ckpt.adam.check(model.params())?;
        if ckpt.adam.t != ckpt.iteration {
            return Err(Error::Resume(format!(
                "optimizer step {} disagrees with iteration {}",
                ckpt.adam.t, ckpt.iteration
            )));
        }
        let best = match ckpt.best {
            Some(b) => Some(b.into_snapshot(model.params())?),
            None => None,
        };
        let (train_set, test_set) = prepare(&cfg, &stats, train, test)?;
        Ok(Self {
            cfg,
            model,
            adam: ckpt.adam,
            iteration: ckpt.iteration,
            train_ids: train.iter().map(|c| c.id.clone()).collect(),
            train_set,
            test_set,
            history: ckpt.history,
            best,
            timings: Timings::default(),
            started: Instant::now(),
        })
    }
}

/// Convenience wrapper: full run from a fresh trainer.
pub fn train(model: Model, train: &[CaseRecord], test: &[CaseRecord], cfg: TrainConfig) -> Result<Trainer> {
    let mut t = Trainer::new(model, train, test, cfg)?;
    t.run()?;
    Ok(t)
}

pub(crate) fn copy_values(dst: &mut ParamStore, src: &ParamStore) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        d.value = s.value.clone();
    }
}
