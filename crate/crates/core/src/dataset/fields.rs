//! Analytic stand-ins for finite-element labels.
//!
//! The formulas and constants here are normative: other implementations of
//! the generator are expected to agree to 1e-12.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, DesignParams, Solid, Vec3};

pub const SURFACE_OFFSET: f64 = 0.2;
pub const RIPPLE_AMPLITUDE: f64 = 0.1;
pub const DISPLACEMENT_SCALE: f64 = 0.01;

/// Per-design constants for [`manufactured_fields`].
#[derive(Clone, Debug)]
pub struct FieldGenerator {
    bounds: Aabb,
    length_scale: f64,
    load: f64,
}

impl FieldGenerator {
    pub fn new(d: &DesignParams) -> Result<Self> {
        let bounds = Solid::from_design(d)?.bounding_box();
        Ok(Self {
            bounds,
            length_scale: bounds.extent().min_element(),
            load: d.load_normalized(),
        })
    }

    /// Stress-like first component; for `c == 4` three displacement-like
    /// components follow.
    pub fn eval(&self, point: Vec3, sdf: f64, c: usize) -> Result<Vec<f64>> {
        if sdf > 0.0 {
            return Err(Error::Domain(format!(
                "manufactured fields are defined inside the solid only (sdf = {sdf})"
            )));
        }
        if c != 1 && c != 4 {
            return Err(Error::Usage(format!(
                "manufactured fields have 1 or 4 components, not {c}"
            )));
        }
        let center = self.bounds.center();
        let ext = self.bounds.extent();
        let xh = 2.0 * (point.x - center.x) / ext.x;
        let yh = 2.0 * (point.y - center.y) / ext.y;
        let zh = 2.0 * (point.z - center.z) / ext.z;
        let sh = sdf / self.length_scale;
        let l = self.load;
        let ripple = (2.0 * PI * xh).sin() * (2.0 * PI * yh).cos() * (2.0 * PI * zh).sin();
        let f1 = l * (1.0 + 1.0 / (SURFACE_OFFSET + sh.abs())) * (1.0 + RIPPLE_AMPLITUDE * ripple);
        let mut out = vec![f1];
        if c == 4 {
            let k = DISPLACEMENT_SCALE * l * (1.0 + sh);
            out.extend([k * xh, k * yh, k * zh]);
        }
        Ok(out)
    }
}

pub fn manufactured_fields(point: Vec3, sdf: f64, d: &DesignParams, c: usize) -> Result<Vec<f64>> {
    FieldGenerator::new(d)?.eval(point, sdf, c)
}

/// Von Mises equivalent stress of `[σxx, σyy, σzz, σxy, σyz, σzx]`.
pub fn von_mises(sigma: [f64; 6]) -> f64 {
    let [xx, yy, zz, xy, yz, zx] = sigma;
    (0.5 * ((xx - yy).powi(2) + (yy - zz).powi(2) + (zz - xx).powi(2))
        + 3.0 * (xy * xy + yz * yz + zx * zx))
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeFamily;

    fn cuboid(eps: f64) -> DesignParams {
        DesignParams::from_named(
            ShapeFamily::CuboidWithVoid,
            &[
                ("r_major", 2.0),
                ("r_minor", 1.0),
                ("theta_x", 0.0),
                ("theta_y", 0.0),
                ("theta_z", 0.0),
                ("d_x", 2.0),
                ("d_y", 2.0),
                ("d_z", 2.0),
                ("eps_y", eps),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_load_gives_zero_fields() {
        let g = FieldGenerator::new(&cuboid(0.001)).unwrap();
        let f = g.eval(Vec3::new(3.0, 0.5, 0.2), -0.4, 4).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_value_hand_case() {
        // Shortest edge of the 8×6×6 box is 6; sdf = −6 gives ŝ = −1.
        let g = FieldGenerator::new(&cuboid(0.0015)).unwrap();
        let f = g.eval(Vec3::ZERO, -6.0, 1).unwrap();
        assert!((f[0] - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn stress_grows_toward_surface() {
        let g = FieldGenerator::new(&cuboid(0.0012)).unwrap();
        let p = Vec3::ZERO;
        let mut prev = 0.0;
        for s in [-3.0, -2.0, -1.0, -0.5, -0.1, 0.0] {
            let v = g.eval(p, s, 1).unwrap()[0];
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn exterior_point_is_domain_error() {
        let g = FieldGenerator::new(&cuboid(0.0012)).unwrap();
        assert!(matches!(g.eval(Vec3::ZERO, 0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn von_mises_identities() {
        assert_eq!(von_mises([250.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 250.0);
        assert_eq!(von_mises([-7.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 7.0);
        assert_eq!(von_mises([3.0, 3.0, 3.0, 0.0, 0.0, 0.0]), 0.0);
        assert!((von_mises([0.0, 0.0, 0.0, 2.0, 0.0, 0.0]) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }
}
