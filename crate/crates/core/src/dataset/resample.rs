use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CaseRecord, NormalizationStats};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::tensor::Tensor;

/// Node indices for a fixed-size draw of `big_n` rows out of `n`.
///
/// Below `n` the draw is without replacement. Above it every node appears
/// once and the remainder is drawn with replacement.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, big_n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if big_n == 0 {
        return Err(Error::Usage("resample size must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Usage("cannot resample an empty node set".into()));
    }
    if big_n <= n {
        return Ok(index::sample(rng, n, big_n).into_vec());
    }
    let mut out: Vec<usize> = (0..n).collect();
    out.extend((n..big_n).map(|_| rng.gen_range(0..n)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resampled {
    pub indices: Vec<usize>,
    pub points: Vec<Vec3>,
    pub sdf: Vec<f64>,
    /// Row-major `N × c`.
    pub fields: Vec<f64>,
}

pub fn resample<R: Rng + ?Sized>(case: &CaseRecord, big_n: usize, rng: &mut R) -> Result<Resampled> {
    let indices = resample_indices(case.node_count(), big_n, rng)?;
    let points = indices.iter().map(|&k| case.points[k]).collect();
    let sdf = indices.iter().map(|&k| case.sdf[k]).collect();
    let mut fields = Vec::with_capacity(big_n * case.c);
    for &k in &indices {
        fields.extend_from_slice(case.field_row(k));
    }
    Ok(Resampled {
        indices,
        points,
        sdf,
        fields,
    })
}

/// Scaled fixed-size arrays for a list of cases, prepared once per run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResampledSet {
    pub n_cases: usize,
    pub n_params: usize,
    pub big_n: usize,
    pub c: usize,
    branch: Vec<f64>,
    trunk: Vec<f64>,
    targets: Vec<f64>,
}

/// One mini-batch: `b×P` branch rows, `b×N×4` trunk rows, `b×N×c` targets.
#[derive(Clone, Debug, PartialEq)]
pub struct ResampledBatch {
    pub branch_inputs: Tensor,
    pub trunk_inputs: Tensor,
    pub targets: Tensor,
}

impl ResampledBatch {
    /// Trunk rows without the signed-distance column.
    pub fn coordinates(&self) -> Tensor {
        let s = self.trunk_inputs.shape();
        let data = self
            .trunk_inputs
            .data()
            .chunks_exact(4)
            .flat_map(|r| r[..3].iter().copied())
            .collect();
        Tensor::new(vec![s[0], s[1], 3], data).expect("trunk rows have four columns")
    }
}

impl ResampledSet {
    /// Case `i` draws from stream `i` of a generator seeded with `seed`.
    pub fn build(cases: &[CaseRecord], stats: &NormalizationStats, big_n: usize, seed: u64) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::Usage("cannot resample an empty case list".into()));
        }
        let c = stats.c();
        let n_params = stats.n_params();
        let mut branch = Vec::with_capacity(cases.len() * n_params);
        let mut trunk = Vec::with_capacity(cases.len() * big_n * 4);
        let mut targets = Vec::with_capacity(cases.len() * big_n * c);
        for (i, case) in cases.iter().enumerate() {
            if case.c != c {
                return Err(Error::Usage(format!(
                    "case '{}' has {} components, stats have {c}",
                    case.id, case.c
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let r = resample(case, big_n, &mut rng)?;
            branch.extend(stats.scale_branch(&case.params)?);
            for (p, s) in r.points.iter().zip(&r.sdf) {
                trunk.extend(stats.trunk_row(*p, *s));
            }
            let mut f = r.fields;
            stats.scale_field_buffer(&mut f);
            targets.extend(f);
        }
        Ok(Self {
            n_cases: cases.len(),
            n_params,
            big_n,
            c,
            branch,
            trunk,
            targets,
        })
    }

    pub fn batch(&self, cases: &[usize]) -> Result<ResampledBatch> {
        if cases.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        if let Some(&bad) = cases.iter().find(|&&i| i >= self.n_cases) {
            return Err(Error::Usage(format!("case {bad} out of range for {} cases", self.n_cases)));
        }
        let (p, t, y) = (self.n_params, self.big_n * 4, self.big_n * self.c);
        let gather = |src: &[f64], w: usize| -> Vec<f64> {
            cases.iter().flat_map(|&i| src[i * w..(i + 1) * w].iter().copied()).collect()
        };
        let b = cases.len();
        Ok(ResampledBatch {
            branch_inputs: Tensor::new(vec![b, p], gather(&self.branch, p))?,
            trunk_inputs: Tensor::new(vec![b, self.big_n, 4], gather(&self.trunk, t))?,
            targets: Tensor::new(vec![b, self.big_n, self.c], gather(&self.targets, y))?,
        })
    }

    /// All cases in order.
    pub fn full(&self) -> Result<ResampledBatch> {
        self.batch(&(0..self.n_cases).collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_n_repeats_cover_every_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let idx = resample_indices(3, 5, &mut rng).unwrap();
        assert_eq!(idx.len(), 5);
        for k in 0..3 {
            assert!(idx.contains(&k));
        }
    }

    #[test]
    fn equal_size_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut idx = resample_indices(40, 40, &mut rng).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn zero_size_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(resample_indices(4, 0, &mut rng).is_err());
    }
}
