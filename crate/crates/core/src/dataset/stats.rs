use serde::{Deserialize, Serialize};

use super::CaseRecord;
use crate::error::{Error, Result};
use crate::geometry::{DesignParams, ShapeFamily, Vec3};

/// Scaling fitted on training cases only.
///
/// Branch inputs are standardized per parameter, coordinates are mapped to
/// `[-1, 1]` by the training bounding box, signed distances are divided by
/// the largest training `|sdf|`, and outputs are standardized per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub family: ShapeFamily,
    pub param_mean: Vec<f64>,
    pub param_std: Vec<f64>,
    pub coord_min: [f64; 3],
    pub coord_max: [f64; 3],
    pub sdf_scale: f64,
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_spread(what: &str, mean: f64, std: f64) -> Result<()> {
    if !(std > 0.0) || std <= 1e-14 * mean.abs() || !std.is_finite() {
        return Err(Error::Fit(format!("{what} has zero variance (mean {mean}, std {std})")));
    }
    Ok(())
}

pub fn fit_stats(train: &[CaseRecord]) -> Result<NormalizationStats> {
    if train.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 training cases, got {}",
            train.len()
        )));
    }
    let family = train[0].params.family();
    let c = train[0].c;
    if let Some(bad) = train.iter().find(|k| k.params.family() != family || k.c != c) {
        return Err(Error::Fit(format!("case '{}' does not match the others", bad.id)));
    }

    let specs = family.params();
    let mut param_mean = Vec::with_capacity(specs.len());
    let mut param_std = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let (m, s) = mean_std(train.iter().map(|case| case.params.values()[k]));
        check_spread(&format!("branch parameter '{}'", spec.name), m, s)?;
        param_mean.push(m);
        param_std.push(s);
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut max_abs_sdf: f64 = 0.0;
    for case in train {
        for p in &case.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        for s in &case.sdf {
            max_abs_sdf = max_abs_sdf.max(s.abs());
        }
    }
    for a in 0..3 {
        if !(hi[a] > lo[a]) {
            return Err(Error::Fit(format!("coordinate axis {a} has zero extent")));
        }
    }
    if !(max_abs_sdf > 0.0) {
        return Err(Error::Fit("all signed distances are zero".into()));
    }

    let mut output_mean = Vec::with_capacity(c);
    let mut output_std = Vec::with_capacity(c);
    for j in 0..c {
        let values = train.iter().flat_map(|case| case.component(j));
        let (m, s) = mean_std(values);
        check_spread(&format!("output component {}", j + 1), m, s)?;
        output_mean.push(m);
        output_std.push(s);
    }

    Ok(NormalizationStats {
        family,
        param_mean,
        param_std,
        coord_min: lo,
        coord_max: hi,
        sdf_scale: max_abs_sdf,
        output_mean,
        output_std,
    })
}

impl NormalizationStats {
    pub fn n_params(&self) -> usize {
        self.param_mean.len()
    }

    pub fn c(&self) -> usize {
        self.output_mean.len()
    }

    pub fn scale_branch(&self, d: &DesignParams) -> Result<Vec<f64>> {
        if d.family() != self.family {
            return Err(Error::Usage(format!(
                "stats fitted for {} cannot scale a {} design",
                self.family,
                d.family()
            )));
        }
        Ok(d.values()
            .iter()
            .zip(self.param_mean.iter().zip(&self.param_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn scale_coords(&self, p: Vec3) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (a, o) in out.iter_mut().enumerate() {
            *o = 2.0 * (p[a] - self.coord_min[a]) / (self.coord_max[a] - self.coord_min[a]) - 1.0;
        }
        out
    }

    pub fn scale_sdf(&self, sdf: f64) -> f64 {
        sdf / self.sdf_scale
    }

    /// Trunk row `(x̂, ŷ, ẑ, ŝ)`.
    pub fn trunk_row(&self, p: Vec3, sdf: f64) -> [f64; 4] {
        let [x, y, z] = self.scale_coords(p);
        [x, y, z, self.scale_sdf(sdf)]
    }

    pub fn scale_outputs(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.output_mean[j]) / self.output_std[j];
        }
    }

    pub fn descale_outputs(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = *v * self.output_std[j] + self.output_mean[j];
        }
    }

    /// Applies [`Self::scale_outputs`] to every `c`-row of a flat buffer.
    pub fn scale_field_buffer(&self, flat: &mut [f64]) {
        for row in flat.chunks_exact_mut(self.c()) {
            self.scale_outputs(row);
        }
    }

    pub fn descale_field_buffer(&self, flat: &mut [f64]) {
        for row in flat.chunks_exact_mut(self.c()) {
            self.descale_outputs(row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GenConfig};

    fn cases() -> Vec<CaseRecord> {
        generate_dataset(&GenConfig {
            family: ShapeFamily::CuboidWithVoid,
            count: 8,
            min_points: 40,
            max_points: 80,
            c: 4,
            seed: 3,
        })
        .unwrap()
        .cases
    }

    #[test]
    fn scaled_train_outputs_are_standardized() {
        let train = cases();
        let stats = fit_stats(&train).unwrap();
        for j in 0..4 {
            let scaled: Vec<f64> = train
                .iter()
                .flat_map(|c| c.component(j))
                .map(|v| (v - stats.output_mean[j]) / stats.output_std[j])
                .collect();
            let n = scaled.len() as f64;
            let mean = scaled.iter().sum::<f64>() / n;
            let std = (scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() <= 1e-10, "{mean}");
            assert!((std - 1.0).abs() <= 1e-10, "{std}");
        }
    }

    #[test]
    fn round_trip_is_exact_to_1e12() {
        let train = cases();
        let stats = fit_stats(&train).unwrap();
        let mut buf = train[0].fields.clone();
        stats.scale_field_buffer(&mut buf);
        stats.descale_field_buffer(&mut buf);
        let max = buf
            .iter()
            .zip(&train[0].fields)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1e-12, "{max}");
    }

    #[test]
    fn stats_ignore_test_cases() {
        let all = cases();
        let a = fit_stats(&all[..5]).unwrap();
        let mut other = all.clone();
        other.truncate(5);
        assert_eq!(a, fit_stats(&other).unwrap());
    }

    #[test]
    fn zero_variance_component_is_named() {
        let mut train = cases();
        for case in &mut train {
            for row in case.fields.chunks_exact_mut(4) {
                row[2] = 1.5;
            }
        }
        let msg = fit_stats(&train).unwrap_err().to_string();
        assert!(msg.contains("output component 3"), "{msg}");
    }

    #[test]
    fn single_case_cannot_be_fitted() {
        assert!(fit_stats(&cases()[..1]).is_err());
    }
}
