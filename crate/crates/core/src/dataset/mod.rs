//! Case storage, manufactured labels, resampling, scaling, and splits.

mod fields;
mod io;
mod resample;
mod split;
mod stats;

pub use fields::{
    manufactured_fields, von_mises, FieldGenerator, DISPLACEMENT_SCALE, RIPPLE_AMPLITUDE,
    SURFACE_OFFSET,
};
pub use io::{load_dataset, save_dataset, DatasetManifest, CASES_FILE, MANIFEST_FILE};
pub use resample::{resample, resample_indices, Resampled, ResampledBatch, ResampledSet};
pub use split::{random_split, similarity, similarity_split, Split, SplitMode};
pub use stats::{fit_stats, NormalizationStats};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_design, sample_interior, DesignParams, ShapeFamily, Vec3};

/// One geometry: its nodes, their signed distances, and field labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseRecord {
    pub id: String,
    pub params: DesignParams,
    pub points: Vec<Vec3>,
    pub sdf: Vec<f64>,
    /// Row-major `n × c`.
    pub fields: Vec<f64>,
    pub c: usize,
}

impl CaseRecord {
    pub fn new(
        id: impl Into<String>,
        params: DesignParams,
        points: Vec<Vec3>,
        sdf: Vec<f64>,
        fields: Vec<f64>,
        c: usize,
    ) -> Result<Self> {
        let id = id.into();
        let n = points.len();
        if n == 0 {
            return Err(Error::Usage(format!("case '{id}' has no nodes")));
        }
        if c == 0 {
            return Err(Error::Usage(format!("case '{id}' has zero field components")));
        }
        if sdf.len() != n || fields.len() != n * c {
            return Err(Error::Usage(format!(
                "case '{id}': {n} points but {} sdf values and {} field values (c = {c})",
                sdf.len(),
                fields.len()
            )));
        }
        Ok(Self {
            id,
            params,
            points,
            sdf,
            fields,
            c,
        })
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    pub fn field_row(&self, k: usize) -> &[f64] {
        &self.fields[k * self.c..(k + 1) * self.c]
    }

    /// Values of one component over all nodes.
    pub fn component(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.fields.iter().skip(j).step_by(self.c).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub family: ShapeFamily,
    pub c: usize,
    pub cases: Vec<CaseRecord>,
    pub stats: Option<NormalizationStats>,
    pub seed: Option<u64>,
    /// Free-form generator settings carried into the manifest.
    pub provenance: Option<serde_json::Value>,
}

impl Dataset {
    pub fn new(family: ShapeFamily, c: usize, cases: Vec<CaseRecord>) -> Result<Self> {
        for case in &cases {
            if case.params.family() != family {
                return Err(Error::Usage(format!(
                    "case '{}' is a {} but the dataset holds {family}",
                    case.id,
                    case.params.family()
                )));
            }
            if case.c != c {
                return Err(Error::Usage(format!(
                    "case '{}' has {} components, dataset has {c}",
                    case.id, case.c
                )));
            }
        }
        Ok(Self {
            family,
            c,
            cases,
            stats: None,
            seed: None,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.cases.iter().map(|c| c.id.clone()).collect()
    }

    pub fn case(&self, id: &str) -> Option<&CaseRecord> {
        self.cases.iter().find(|c| c.id == id)
    }

    /// Cases for `ids`, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Vec<CaseRecord>> {
        let missing: Vec<&String> = ids.iter().filter(|id| self.case(id).is_none()).collect();
        if !missing.is_empty() {
            return Err(Error::Usage(format!("ids not in dataset: {missing:?}")));
        }
        Ok(ids.iter().map(|id| self.case(id).unwrap().clone()).collect())
    }
}

/// Settings for a manufactured dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub family: ShapeFamily,
    pub count: usize,
    pub min_points: usize,
    pub max_points: usize,
    pub c: usize,
    pub seed: u64,
}

/// Redraws allowed per case when a design turns out degenerate.
pub const MAX_DESIGN_RETRIES: usize = 16;

pub fn case_id(index: usize) -> String {
    format!("case_{index:05}")
}

/// Generates case `index` from its own stream seeded with `seed ^ index`.
pub fn generate_case(cfg: &GenConfig, index: usize) -> Result<CaseRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index as u64);
    let n = rng.gen_range(cfg.min_points..=cfg.max_points);
    let mut last_err = None;
    for _ in 0..MAX_DESIGN_RETRIES {
        let params = sample_design(cfg.family, &mut rng);
        let samples = match sample_interior(&params, n, &mut rng) {
            Ok(s) => s,
            Err(e @ Error::Geometry(_)) => {
                log::warn!("case {index}: redrawing degenerate design: {e}");
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let gen = FieldGenerator::new(&params)?;
        let mut fields = Vec::with_capacity(n * cfg.c);
        for s in &samples {
            fields.extend(gen.eval(s.point, s.sdf, cfg.c)?);
        }
        return CaseRecord::new(
            case_id(index),
            params,
            samples.iter().map(|s| s.point).collect(),
            samples.iter().map(|s| s.sdf).collect(),
            fields,
            cfg.c,
        );
    }
    Err(last_err.unwrap_or_else(|| Error::Geometry(format!("case {index}: no valid design"))))
}

/// Builds a whole dataset; cases are generated in parallel but each depends
/// only on `(seed, index)`.
pub fn generate_dataset(cfg: &GenConfig) -> Result<Dataset> {
    if cfg.count == 0 || cfg.min_points == 0 || cfg.min_points > cfg.max_points {
        return Err(Error::Config(format!(
            "need count >= 1 and 1 <= min_points <= max_points, got {cfg:?}"
        )));
    }
    let cases = (0..cfg.count)
        .into_par_iter()
        .map(|i| generate_case(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(cfg.family, cfg.c, cases)?;
    ds.seed = Some(cfg.seed);
    ds.provenance = Some(serde_json::to_value(cfg)?);
    Ok(ds)
}
