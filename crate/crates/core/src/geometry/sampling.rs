use rand::Rng;
use serde::{Deserialize, Serialize};

use super::family::{DesignParams, Solid};
use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Proposals per acceptance-rate window.
pub const REJECTION_WINDOW: usize = 100_000;
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdfSample {
    pub point: Vec3,
    pub sdf: f64,
}

/// Uniform proposal over the solid's bounding box.
pub fn propose<R: Rng + ?Sized>(solid: &Solid, rng: &mut R) -> Vec3 {
    let bb = solid.bounding_box();
    let e = bb.extent();
    bb.min + Vec3::new(e.x * rng.gen::<f64>(), e.y * rng.gen::<f64>(), e.z * rng.gen::<f64>())
}

/// `n` points with `sdf <= 0`, drawn by rejection from the exact bounding box.
pub fn sample_interior<R: Rng + ?Sized>(
    d: &DesignParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SdfSample>> {
    if n == 0 {
        return Err(Error::Usage("sample_interior needs n >= 1".into()));
    }
    let solid = Solid::from_design(d)?;
    let mut out = Vec::with_capacity(n);
    let (mut window_proposals, mut window_accepts) = (0usize, 0usize);
    while out.len() < n {
        let point = propose(&solid, rng);
        let sdf = solid.sdf(point)?;
        window_proposals += 1;
        if sdf <= 0.0 {
            window_accepts += 1;
            out.push(SdfSample { point, sdf });
        }
        if window_proposals == REJECTION_WINDOW {
            let rate = window_accepts as f64 / window_proposals as f64;
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(Error::Geometry(format!(
                    "acceptance rate {rate:e} below {MIN_ACCEPTANCE_RATE:e} for {:?}",
                    d.values()
                )));
            }
            window_proposals = 0;
            window_accepts = 0;
        }
    }
    Ok(out)
}
