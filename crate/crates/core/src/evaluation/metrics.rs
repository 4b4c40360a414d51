use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points whose truth is at most this fraction of the largest `|truth|` of
/// their component are left out of the relative error.
pub const RELATIVE_MASK_TAU: f64 = 1e-8;

/// Errors of one case, per output component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub id: String,
    pub node_count: usize,
    pub mae: Vec<f64>,
    /// Mean of `|(truth − pred)/truth|·100` over unmasked points; `None`
    /// when every point of the component is masked.
    pub relative_error_pct: Vec<Option<f64>>,
    /// `‖truth − pred‖₂ / ‖truth‖₂`; `None` for an all-zero truth.
    pub relative_l2: Vec<Option<f64>>,
    pub masked_points: Vec<usize>,
    pub squared_error_sum: Vec<f64>,
    pub squared_truth_sum: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict_seconds: Option<f64>,
}

/// Compares row-major `n×c` predictions with the truth.
pub fn case_metrics(id: &str, pred: &[f64], truth: &[f64], c: usize) -> Result<CaseMetrics> {
    if c == 0 || pred.len() != truth.len() || truth.len() % c != 0 || truth.is_empty() {
        return Err(Error::dim("case_metrics", &[pred.len(), c], &[truth.len(), c]));
    }
    let n = truth.len() / c;
    let mut mae = vec![0.0; c];
    let mut rel_sum = vec![0.0; c];
    let mut rel_count = vec![0usize; c];
    let mut se = vec![0.0; c];
    let mut st = vec![0.0; c];
    let mut max_abs = vec![0.0f64; c];
    for row in truth.chunks_exact(c) {
        for (m, v) in max_abs.iter_mut().zip(row) {
            *m = m.max(v.abs());
        }
    }
    for (p, t) in pred.chunks_exact(c).zip(truth.chunks_exact(c)) {
        for j in 0..c {
            let d = t[j] - p[j];
            mae[j] += d.abs();
            se[j] += d * d;
            st[j] += t[j] * t[j];
            if t[j].abs() > RELATIVE_MASK_TAU * max_abs[j] {
                rel_sum[j] += (d / t[j]).abs() * 100.0;
                rel_count[j] += 1;
            }
        }
    }
    Ok(CaseMetrics {
        id: id.to_string(),
        node_count: n,
        mae: mae.into_iter().map(|m| m / n as f64).collect(),
        relative_error_pct: rel_sum
            .iter()
            .zip(&rel_count)
            .map(|(&s, &k)| (k > 0).then(|| s / k as f64))
            .collect(),
        relative_l2: se
            .iter()
            .zip(&st)
            .map(|(&e, &t)| (t > 0.0).then(|| (e / t).sqrt()))
            .collect(),
        masked_points: rel_count.iter().map(|&k| n - k).collect(),
        squared_error_sum: se,
        squared_truth_sum: st,
        predict_seconds: None,
    })
}
