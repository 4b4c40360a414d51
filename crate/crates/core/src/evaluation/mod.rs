//! Error metrics, case rankings, similarity regression and timing fits.

mod metrics;
mod regression;
mod report;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{resample, CaseRecord};
use crate::error::Result;
use crate::geometry::{DesignParams, Vec3};
use crate::model::Model;

pub use metrics::{case_metrics, CaseMetrics, RELATIVE_MASK_TAU};
pub use regression::{fit_power_law, ols, similarity_regression, LinearFit, PowerLawFit};
pub use report::{
    aggregate, aggregate_with, nearest_rank, percentile_table, EvalReport, Grouping, PercentileEntry,
    DEFAULT_PERCENTILES,
};

/// Metrics on every node of each case, with the prediction wall time.
pub fn evaluate_full_mesh(model: &Model, cases: &[CaseRecord]) -> Result<Vec<CaseMetrics>> {
    cases
        .iter()
        .map(|case| {
            let start = Instant::now();
            let pred = model.predict_case(case)?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut m = case_metrics(&case.id, &pred, &case.fields, case.c)?;
            m.predict_seconds = Some(elapsed);
            Ok(m)
        })
        .collect()
}

/// Metrics on `big_n` resampled nodes per case. Case `i` draws from
/// stream `i` of `seed`, as the training sets do.
pub fn evaluate_subset(model: &Model, cases: &[CaseRecord], big_n: usize, seed: u64) -> Result<Vec<CaseMetrics>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let r = resample(case, big_n, &mut rng)?;
            let pred = model.predict_points(&case.params, &r.points, &r.sdf)?;
            case_metrics(&case.id, &pred, &r.fields, case.c)
        })
        .collect()
}

/// Median of `repeats` timings of `f`.
pub fn median_seconds<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut t = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed().as_secs_f64());
    }
    t.sort_by(f64::total_cmp);
    Ok(t[t.len() / 2])
}

/// Smallest nonzero step observed on the monotonic clock.
pub fn timer_resolution() -> f64 {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best.as_secs_f64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub node_count: usize,
    pub median_seconds: f64,
    pub repeats: usize,
    /// Set when the median is too close to the timer resolution to use.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub timer_resolution_seconds: f64,
    pub records: Vec<TimingRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<PowerLawFit>,
    pub warnings: Vec<String>,
}

/// Timings below this multiple of the clock resolution are excluded.
pub const RESOLUTION_FACTOR: f64 = 100.0;

/// Times `model` on each point cloud of `params` and fits a power law of
/// time against node count. A failed fit becomes a warning.
pub fn timing_benchmark(
    model: &Model,
    params: &DesignParams,
    clouds: &[(Vec<Vec3>, Vec<f64>)],
    repeats: usize,
) -> Result<TimingReport> {
    let resolution = timer_resolution();
    let mut records = Vec::with_capacity(clouds.len());
    let mut warnings = Vec::new();
    for (points, sdf) in clouds {
        let median = median_seconds(repeats, || model.predict_points(params, points, sdf).map(|_| ()))?;
        let excluded = median < RESOLUTION_FACTOR * resolution;
        if excluded {
            let msg = format!(
                "{} nodes: median {median:e} s is within {RESOLUTION_FACTOR}x of the timer resolution; excluded",
                points.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        records.push(TimingRecord {
            node_count: points.len(),
            median_seconds: median,
            repeats: repeats.max(1),
            excluded,
        });
    }
    let kept: Vec<&TimingRecord> = records.iter().filter(|r| !r.excluded).collect();
    let sizes: Vec<usize> = kept.iter().map(|r| r.node_count).collect();
    let secs: Vec<f64> = kept.iter().map(|r| r.median_seconds).collect();
    let fit = match fit_power_law(&sizes, &secs) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("no power-law fit: {e}"));
            None
        }
    };
    Ok(TimingReport {
        timer_resolution_seconds: resolution,
        records,
        fit,
        warnings,
    })
}
