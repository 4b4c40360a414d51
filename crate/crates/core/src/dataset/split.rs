use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::geometry::DesignParams;

/// L2 distance between normalized geometric parameters; loads are excluded.
pub fn similarity(i: &DesignParams, j: &DesignParams) -> Result<f64> {
    if i.family() != j.family() {
        return Err(Error::Usage(format!(
            "cannot compare a {} design with a {} design",
            i.family(),
            j.family()
        )));
    }
    Ok(i.geometric_normalized()
        .iter()
        .zip(j.geometric_normalized())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    Random { seed: u64 },
    Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    #[serde(flatten)]
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// `⌊fraction·n⌋`, kept inside `[1, n−1]`.
fn train_count(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Usage(format!("train fraction must be in (0, 1), got {fraction}")));
    }
    if n < 2 {
        return Err(Error::Usage(format!("need at least 2 cases to split, got {n}")));
    }
    let k = (fraction * n as f64 + 1e-9).floor() as usize;
    Ok(k.clamp(1, n - 1))
}

fn assemble(ds: &Dataset, mode: SplitMode, fraction: f64, order: &[usize], k: usize) -> Split {
    let mut train: Vec<usize> = order[..k].to_vec();
    let mut test: Vec<usize> = order[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let ids = |v: Vec<usize>| v.into_iter().map(|i| ds.cases[i].id.clone()).collect();
    Split {
        mode,
        train_fraction: fraction,
        train: ids(train),
        test: ids(test),
    }
}

pub fn random_split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    let k = train_count(ds.len(), train_fraction)?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(assemble(ds, SplitMode::Random { seed }, train_fraction, &order, k))
}

/// The designs most similar to case 0 train; the rest test.
pub fn similarity_split(ds: &Dataset, train_fraction: f64) -> Result<Split> {
    let k = train_count(ds.len(), train_fraction)?;
    let reference = &ds.cases[0].params;
    let scores = ds
        .cases
        .iter()
        .map(|c| similarity(reference, &c.params))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok(assemble(ds, SplitMode::Similarity, train_fraction, &order, k))
}

impl Split {
    /// Fails unless the two lists partition `ds` exactly.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for id in self.train.iter().chain(&self.test) {
            if ds.case(id).is_none() {
                return Err(Error::Usage(format!("split names unknown case '{id}'")));
            }
            if !seen.insert(id) {
                return Err(Error::Usage(format!("case '{id}' appears twice in the split")));
            }
        }
        if seen.len() != ds.len() {
            return Err(Error::Usage(format!(
                "split covers {} of {} cases",
                seen.len(),
                ds.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GenConfig};
    use crate::geometry::ShapeFamily;

    fn beam(l: f64, t: f64, r: f64) -> DesignParams {
        DesignParams::from_named(
            ShapeFamily::BeamWithHole,
            &[("length", l), ("thickness", t), ("radius", r), ("pressure", 75.0)],
        )
        .unwrap()
    }

    fn ds(n: usize) -> Dataset {
        generate_dataset(&GenConfig {
            family: ShapeFamily::BeamWithHole,
            count: n,
            min_points: 5,
            max_points: 5,
            c: 1,
            seed: 11,
        })
        .unwrap()
    }

    #[test]
    fn corner_designs_are_root_three_apart() {
        let specs = ShapeFamily::BeamWithHole.params();
        let lo = beam(specs[0].min, specs[1].min, specs[2].min);
        let hi = beam(specs[0].max, specs[1].max, specs[2].max);
        assert!((similarity(&lo, &hi).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(similarity(&lo, &lo).unwrap(), 0.0);
    }

    #[test]
    fn eighty_percent_of_3000_is_2400() {
        assert_eq!(train_count(3000, 0.8).unwrap(), 2400);
        assert_eq!(train_count(250, 0.8).unwrap(), 200);
    }

    #[test]
    fn random_split_partitions_and_repeats() {
        let d = ds(20);
        let a = random_split(&d, 0.75, 4).unwrap();
        a.validate(&d).unwrap();
        assert_eq!(a.train.len(), 15);
        assert_eq!(a, random_split(&d, 0.75, 4).unwrap());
        assert_ne!(a.train, random_split(&d, 0.75, 5).unwrap().train);
    }

    #[test]
    fn similarity_split_keeps_reference_and_ranks() {
        let d = ds(25);
        let s = similarity_split(&d, 0.8).unwrap();
        s.validate(&d).unwrap();
        assert!(s.train.contains(&d.cases[0].id));
        let score = |id: &String| similarity(&d.cases[0].params, &d.case(id).unwrap().params).unwrap();
        let max_train = s.train.iter().map(score).fold(0.0, f64::max);
        let min_test = s.test.iter().map(score).fold(f64::INFINITY, f64::min);
        assert!(max_train <= min_test);
    }

    #[test]
    fn split_json_round_trip() {
        let d = ds(6);
        let s = random_split(&d, 0.5, 1).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"mode\":\"random\""));
        assert_eq!(serde_json::from_str::<Split>(&text).unwrap(), s);
    }
}
