//! Shape families, analytic and mesh signed distances, interior sampling.
//!
//! Sign convention everywhere: negative inside the solid, zero on its
//! boundary, positive outside. Lengths are in millimetres.

mod family;
mod mesh;
mod primitives;
mod sampling;
mod vec3;

pub use family::{
    rotated_ellipsoid_half_extents, sample_design, sdf_family, Aabb, DesignParams, ParamSpec,
    ShapeFamily, Solid, BEAM_HEIGHT, BEAM_HOLE_END_OFFSET,
};
pub use mesh::{
    box_mesh, brute_force_sdf, closest_point_on_triangle, icosphere, mesh_sdf, ClosestHit,
    Feature, MeshFile, TriMesh,
};
pub use primitives::{
    ellipsoid_closest_point, rotate_extrinsic_xyz, rotation_extrinsic_xyz, sdf_box,
    sdf_cylinder, sdf_ellipsoid, ELLIPSOID_MAX_ITERATIONS, ELLIPSOID_TOLERANCE,
};
pub use sampling::{propose, sample_interior, SdfSample, MIN_ACCEPTANCE_RATE, REJECTION_WINDOW};
pub use vec3::{Mat3, Vec3};
