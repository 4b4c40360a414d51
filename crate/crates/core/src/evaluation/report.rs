use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{CaseMetrics, RELATIVE_MASK_TAU};
use super::regression::{LinearFit, PowerLawFit};
use crate::error::{Error, Result};

/// Which nodes the metrics were computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// The fixed-size resampled points used in training.
    Subset,
    /// Every node of each case.
    FullMesh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileEntry {
    pub label: String,
    /// 1-based position in the ascending first-component MAE ranking.
    pub rank: usize,
    pub id: String,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grouping: Grouping,
    pub relative_mask_tau: f64,
    pub case_count: usize,
    /// Equal-weight mean over cases of each case's MAE.
    pub mean_mae: Vec<f64>,
    pub mean_relative_error_pct: Vec<Option<f64>>,
    pub mean_relative_l2: Vec<Option<f64>>,
    /// `sqrt(Σ squared error / Σ squared truth)` over all nodes of all cases.
    pub pooled_relative_l2: Vec<Option<f64>>,
    pub percentiles: Vec<PercentileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_fit: Option<LinearFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_fit: Option<PowerLawFit>,
    pub cases: Vec<CaseMetrics>,
}

/// Percentiles reported by default next to the best and worst case.
pub const DEFAULT_PERCENTILES: [f64; 3] = [50.0, 75.0, 90.0];

/// Nearest rank: `⌈p/100 · n⌉`, at least 1.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    ((p / 100.0 * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Best, the requested percentiles, and worst by first-component MAE.
/// Ties in MAE keep the input order.
pub fn percentile_table(cases: &[CaseMetrics], percentiles: &[f64]) -> Vec<PercentileEntry> {
    let mut order: Vec<usize> = (0..cases.len()).collect();
    order.sort_by(|&a, &b| cases[a].mae[0].total_cmp(&cases[b].mae[0]).then(a.cmp(&b)));
    let entry = |label: String, rank: usize| {
        let m = &cases[order[rank - 1]];
        PercentileEntry {
            label,
            rank,
            id: m.id.clone(),
            mae: m.mae[0],
        }
    };
    let n = cases.len();
    let mut out = vec![entry("best".into(), 1)];
    for &p in percentiles {
        out.push(entry(format!("p{p}"), nearest_rank(p, n)));
    }
    out.push(entry("worst".into(), n));
    out
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut s, mut k) = (0.0, 0usize);
    for v in values.flatten() {
        s += v;
        k += 1;
    }
    (k > 0).then(|| s / k as f64)
}

pub fn aggregate(cases: Vec<CaseMetrics>, grouping: Grouping) -> Result<EvalReport> {
    aggregate_with(cases, grouping, &DEFAULT_PERCENTILES)
}

pub fn aggregate_with(cases: Vec<CaseMetrics>, grouping: Grouping, percentiles: &[f64]) -> Result<EvalReport> {
    let Some(first) = cases.first() else {
        return Err(Error::Usage("cannot aggregate an empty list of cases".into()));
    };
    let c = first.mae.len();
    if let Some(bad) = cases.iter().find(|m| m.mae.len() != c) {
        return Err(Error::Usage(format!("case '{}' has a different component count", bad.id)));
    }
    let n = cases.len() as f64;
    let mean_mae = (0..c).map(|j| cases.iter().map(|m| m.mae[j]).sum::<f64>() / n).collect();
    let mean_relative_error_pct = (0..c)
        .map(|j| mean_defined(cases.iter().map(|m| m.relative_error_pct[j])))
        .collect();
    let mean_relative_l2 = (0..c)
        .map(|j| mean_defined(cases.iter().map(|m| m.relative_l2[j])))
        .collect();
    let pooled_relative_l2 = (0..c)
        .map(|j| {
            let e: f64 = cases.iter().map(|m| m.squared_error_sum[j]).sum();
            let t: f64 = cases.iter().map(|m| m.squared_truth_sum[j]).sum();
            (t > 0.0).then(|| (e / t).sqrt())
        })
        .collect();
    Ok(EvalReport {
        grouping,
        relative_mask_tau: RELATIVE_MASK_TAU,
        case_count: cases.len(),
        mean_mae,
        mean_relative_error_pct,
        mean_relative_l2,
        pooled_relative_l2,
        percentiles: percentile_table(&cases, percentiles),
        similarity_fit: None,
        timing_fit: None,
        cases,
    })
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One row per case: id, node count, then MAE, relative error, and
    /// relative L2 for each component. Undefined values are empty cells.
    pub fn to_csv(&self) -> String {
        let c = self.mean_mae.len();
        let mut out = String::from("id,node_count");
        for j in 1..=c {
            let _ = write!(out, ",mae_{j},relative_error_pct_{j},relative_l2_{j}");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for m in &self.cases {
            let _ = write!(out, "{},{}", m.id, m.node_count);
            for j in 0..c {
                let _ = write!(
                    out,
                    ",{},{},{}",
                    m.mae[j],
                    opt(m.relative_error_pct[j]),
                    opt(m.relative_l2[j])
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
