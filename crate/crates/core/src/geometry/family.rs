//! The two parameterized shape families and their solids.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::primitives::{ellipsoid_closest_point, rotation_extrinsic_xyz, sdf_box, sdf_cylinder};
use super::vec3::{Mat3, Vec3};
use crate::error::{Error, Result};

/// Fixed beam height (Y extent); the family only varies length and thickness.
pub const BEAM_HEIGHT: f64 = 40.0;
/// Distance from the beam's loaded (right) end to the hole axis.
pub const BEAM_HOLE_END_OFFSET: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeFamily {
    BeamWithHole,
    CuboidWithVoid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub unit: &'static str,
    pub geometric: bool,
}

const fn geo(name: &'static str, min: f64, max: f64, unit: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        min,
        max,
        unit,
        geometric: true,
    }
}

const BEAM_PARAMS: [ParamSpec; 4] = [
    geo("length", 80.0, 120.0, "mm"),
    geo("thickness", 15.0, 30.0, "mm"),
    geo("radius", 10.0, 15.0, "mm"),
    ParamSpec {
        name: "pressure",
        min: 50.0,
        max: 100.0,
        unit: "MPa",
        geometric: false,
    },
];

const CUBOID_PARAMS: [ParamSpec; 9] = [
    geo("r_major", 0.5, 5.0, "mm"),
    geo("r_minor", 0.5, 5.0, "mm"),
    geo("theta_x", 0.0, 90.0, "deg"),
    geo("theta_y", 0.0, 90.0, "deg"),
    geo("theta_z", 0.0, 90.0, "deg"),
    geo("d_x", 1.0, 5.0, "mm"),
    geo("d_y", 1.0, 5.0, "mm"),
    geo("d_z", 1.0, 5.0, "mm"),
    ParamSpec {
        name: "eps_y",
        min: 0.001,
        max: 0.0015,
        unit: "strain",
        geometric: false,
    },
];

impl ShapeFamily {
    /// Parameters in canonical order: geometric first, load last.
    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            ShapeFamily::BeamWithHole => &BEAM_PARAMS,
            ShapeFamily::CuboidWithVoid => &CUBOID_PARAMS,
        }
    }

    pub fn n_params(self) -> usize {
        self.params().len()
    }

    pub fn n_geometric(self) -> usize {
        self.params().iter().filter(|p| p.geometric).count()
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::BeamWithHole => "BeamWithHole",
            ShapeFamily::CuboidWithVoid => "CuboidWithVoid",
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beamwithhole" | "beam" => Ok(ShapeFamily::BeamWithHole),
            "cuboidwithvoid" | "cuboid" => Ok(ShapeFamily::CuboidWithVoid),
            _ => Err(Error::Usage(format!("unknown shape family '{s}'"))),
        }
    }
}

/// Design and load parameters of one case, in the family's canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignParams {
    family: ShapeFamily,
    values: Vec<f64>,
}

impl DesignParams {
    pub fn new(family: ShapeFamily, values: Vec<f64>) -> Result<Self> {
        let specs = family.params();
        if values.len() != specs.len() {
            return Err(Error::Usage(format!(
                "{family} takes {} parameters, got {}",
                specs.len(),
                values.len()
            )));
        }
        for (spec, &v) in specs.iter().zip(&values) {
            if !(spec.min..=spec.max).contains(&v) {
                return Err(Error::Usage(format!(
                    "{family}.{} = {v} outside [{}, {}] {}",
                    spec.name, spec.min, spec.max, spec.unit
                )));
            }
        }
        Ok(Self { family, values })
    }

    pub fn from_named(family: ShapeFamily, named: &[(&str, f64)]) -> Result<Self> {
        let values = family
            .params()
            .iter()
            .map(|spec| {
                named
                    .iter()
                    .find(|(n, _)| *n == spec.name)
                    .map(|&(_, v)| v)
                    .ok_or_else(|| Error::Usage(format!("missing parameter '{}'", spec.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        if named.len() != values.len() {
            return Err(Error::Usage(format!(
                "unexpected parameters for {family}: {:?}",
                named.iter().map(|(n, _)| *n).collect::<Vec<_>>()
            )));
        }
        Self::new(family, values)
    }

    pub fn family(&self) -> ShapeFamily {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.family
            .params()
            .iter()
            .position(|p| p.name == name)
            .map(|i| self.values[i])
    }

    fn value(&self, name: &str) -> f64 {
        self.get(name).expect("canonical parameter name")
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.family
            .params()
            .iter()
            .zip(&self.values)
            .map(|(s, &v)| (s.name, v))
    }

    /// `(value − min)/(max − min)` per parameter.
    pub fn normalized(&self) -> Vec<f64> {
        self.family
            .params()
            .iter()
            .zip(&self.values)
            .map(|(s, v)| (v - s.min) / (s.max - s.min))
            .collect()
    }

    pub fn geometric_normalized(&self) -> Vec<f64> {
        self.family
            .params()
            .iter()
            .zip(self.normalized())
            .filter(|(s, _)| s.geometric)
            .map(|(_, v)| v)
            .collect()
    }

    pub fn load(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn load_normalized(&self) -> f64 {
        *self.normalized().last().unwrap()
    }
}

/// Each parameter drawn independently and uniformly from its range.
pub fn sample_design<R: Rng + ?Sized>(family: ShapeFamily, rng: &mut R) -> DesignParams {
    let values = family
        .params()
        .iter()
        .map(|s| s.min + (s.max - s.min) * rng.gen::<f64>())
        .collect();
    DesignParams { family, values }
}

/// Axis-aligned bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// A concrete solid built from a design.
#[derive(Clone, Debug, PartialEq)]
pub enum Solid {
    /// Box `[0,L]×[0,H]×[0,T]` minus a through-hole along Z.
    Beam {
        half: Vec3,
        center: Vec3,
        hole_center: Vec3,
        hole_radius: f64,
    },
    /// Origin-centered box minus a rotated spheroidal void `(r_major, r_minor, r_minor)`.
    Cuboid {
        half: Vec3,
        rotation: Mat3,
        semi_axes: Vec3,
    },
}

impl Solid {
    pub fn from_design(d: &DesignParams) -> Result<Self> {
        match d.family {
            ShapeFamily::BeamWithHole => {
                let length = d.value("length");
                let thickness = d.value("thickness");
                let radius = d.value("radius");
                let half = Vec3::new(length, BEAM_HEIGHT, thickness) * 0.5;
                let hole_center = Vec3::new(length - BEAM_HOLE_END_OFFSET, 0.5 * BEAM_HEIGHT, 0.0);
                let margin = (0.5 * BEAM_HEIGHT - radius).min(BEAM_HOLE_END_OFFSET - radius);
                if margin <= 0.0 {
                    return Err(Error::Geometry(format!(
                        "hole of radius {radius} breaks through the beam"
                    )));
                }
                Ok(Solid::Beam {
                    half,
                    center: half,
                    hole_center,
                    hole_radius: radius,
                })
            }
            ShapeFamily::CuboidWithVoid => {
                let rotation = rotation_extrinsic_xyz(
                    d.value("theta_x"),
                    d.value("theta_y"),
                    d.value("theta_z"),
                );
                let semi_axes = Vec3::new(d.value("r_major"), d.value("r_minor"), d.value("r_minor"));
                let void_half = rotated_ellipsoid_half_extents(&rotation, semi_axes);
                let offsets = Vec3::new(d.value("d_x"), d.value("d_y"), d.value("d_z"));
                let half = void_half + offsets;
                if (0..3).any(|i| void_half[i] >= half[i]) {
                    return Err(Error::Geometry(format!(
                        "void {:?} is not strictly inside cuboid {:?}",
                        void_half.to_array(),
                        half.to_array()
                    )));
                }
                Ok(Solid::Cuboid {
                    half,
                    rotation,
                    semi_axes,
                })
            }
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Solid::Beam { half, center, .. } => Aabb {
                min: *center - *half,
                max: *center + *half,
            },
            Solid::Cuboid { half, .. } => Aabb {
                min: -*half,
                max: *half,
            },
        }
    }

    pub fn sdf(&self, p: Vec3) -> Result<f64> {
        match self {
            Solid::Beam {
                half,
                center,
                hole_center,
                hole_radius,
            } => {
                let outer = sdf_box(p - *center, *half);
                let hole = sdf_cylinder(p, *hole_radius, Vec3::Z, *hole_center);
                Ok(outer.max(-hole))
            }
            Solid::Cuboid {
                half,
                rotation,
                semi_axes,
            } => {
                let outer = sdf_box(p, *half);
                let local = rotation.transpose().mul_vec(p);
                let (_, void) = ellipsoid_closest_point(local, *semi_axes)?;
                Ok(outer.max(-void))
            }
        }
    }

    /// Exact enclosed volume.
    pub fn volume(&self) -> f64 {
        let bb = self.bounding_box().volume();
        match self {
            Solid::Beam {
                half, hole_radius, ..
            } => bb - std::f64::consts::PI * hole_radius * hole_radius * 2.0 * half.z,
            Solid::Cuboid { semi_axes, .. } => {
                bb - 4.0 / 3.0 * std::f64::consts::PI * semi_axes.x * semi_axes.y * semi_axes.z
            }
        }
    }
}

/// Half extents of the axis-aligned box around `R · ellipsoid(semi_axes)`.
pub fn rotated_ellipsoid_half_extents(rotation: &Mat3, semi_axes: Vec3) -> Vec3 {
    let r = &rotation.0;
    let e = |i: usize| {
        ((r[i][0] * semi_axes.x).powi(2)
            + (r[i][1] * semi_axes.y).powi(2)
            + (r[i][2] * semi_axes.z).powi(2))
        .sqrt()
    };
    Vec3::new(e(0), e(1), e(2))
}

/// Signed distance of `p` to the solid described by `d`.
pub fn sdf_family(p: Vec3, d: &DesignParams) -> Result<f64> {
    Solid::from_design(d)?.sdf(p)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn parameter_counts_per_family() {
        assert_eq!(ShapeFamily::BeamWithHole.n_geometric(), 3);
        assert_eq!(ShapeFamily::BeamWithHole.n_params(), 4);
        assert_eq!(ShapeFamily::CuboidWithVoid.n_geometric(), 8);
        assert_eq!(ShapeFamily::CuboidWithVoid.n_params(), 9);
    }

    #[test]
    fn sampled_designs_respect_ranges_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let b = sample_design(ShapeFamily::BeamWithHole, &mut rng);
            let p = b.get("pressure").unwrap();
            assert!((50.0..=100.0).contains(&p));
            let c = sample_design(ShapeFamily::CuboidWithVoid, &mut rng);
            let t = c.get("theta_x").unwrap();
            assert!((0.0..=90.0).contains(&t));
            assert!(DesignParams::new(c.family(), c.values().to_vec()).is_ok());
            assert!(c.normalized().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let a = sample_design(ShapeFamily::CuboidWithVoid, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_design(ShapeFamily::CuboidWithVoid, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(DesignParams::new(ShapeFamily::BeamWithHole, vec![79.0, 20.0, 12.0, 60.0]).is_err());
        assert!(DesignParams::new(ShapeFamily::BeamWithHole, vec![90.0, 20.0, 12.0]).is_err());
    }

    #[test]
    fn beam_csg_dominance_and_hole_boundary() {
        let d = DesignParams::from_named(
            ShapeFamily::BeamWithHole,
            &[("length", 100.0), ("thickness", 20.0), ("radius", 10.0), ("pressure", 70.0)],
        )
        .unwrap();
        let solid = Solid::from_design(&d).unwrap();
        // Near the fixed end, far from the hole: pure box distance.
        let p = Vec3::new(5.0, 20.0, 10.0);
        assert_eq!(solid.sdf(p).unwrap(), sdf_box(p - Vec3::new(50.0, 20.0, 10.0), Vec3::new(50.0, 20.0, 10.0)));
        assert_eq!(solid.sdf(p).unwrap(), -5.0);
        // On the hole surface.
        let q = Vec3::new(80.0 + 10.0, 20.0, 7.0);
        assert!(solid.sdf(q).unwrap().abs() < 1e-9);
        // Inside the hole is outside the solid.
        assert!(solid.sdf(Vec3::new(80.0, 20.0, 7.0)).unwrap() > 0.0);
    }

    #[test]
    fn cuboid_void_surface_is_zero() {
        let d = DesignParams::from_named(
            ShapeFamily::CuboidWithVoid,
            &[
                ("r_major", 3.0),
                ("r_minor", 1.5),
                ("theta_x", 20.0),
                ("theta_y", 35.0),
                ("theta_z", 70.0),
                ("d_x", 2.0),
                ("d_y", 3.0),
                ("d_z", 1.0),
                ("eps_y", 0.0012),
            ],
        )
        .unwrap();
        let solid = Solid::from_design(&d).unwrap();
        let Solid::Cuboid { rotation, .. } = &solid else { unreachable!() };
        let local = Vec3::new(3.0 * 0.6, 1.5 * 0.8, 0.0);
        let p = rotation.mul_vec(local);
        assert!(solid.sdf(p).unwrap().abs() < 1e-9);
        assert!(solid.sdf(Vec3::ZERO).unwrap() > 0.0);
    }

    #[test]
    fn rotated_void_box_is_tight() {
        let r = rotation_extrinsic_xyz(0.0, 0.0, 90.0);
        let e = rotated_ellipsoid_half_extents(&r, Vec3::new(3.0, 1.0, 2.0));
        assert!((e - Vec3::new(1.0, 3.0, 2.0)).norm() < 1e-12);
    }
}
