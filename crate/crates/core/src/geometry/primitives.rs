//! Exact signed distances to the primitives the shape families are built from.
//! Every function here is negative inside, zero on the surface.

use super::vec3::{Mat3, Vec3};
use crate::error::{Error, Result};

/// Box centered at the origin.
pub fn sdf_box(p: Vec3, half_extents: Vec3) -> f64 {
    let q = p.abs() - half_extents;
    q.max(Vec3::ZERO).norm() + q.max_element().min(0.0)
}

/// Infinite cylinder through `center` along `axis`.
pub fn sdf_cylinder(p: Vec3, radius: f64, axis: Vec3, center: Vec3) -> f64 {
    let axis = axis.normalized();
    let d = p - center;
    let perp = d - axis * d.dot(axis);
    perp.norm() - radius
}

/// Rotation applying fixed-axis rotations about X, then Y, then Z.
pub fn rotation_extrinsic_xyz(theta_x_deg: f64, theta_y_deg: f64, theta_z_deg: f64) -> Mat3 {
    Mat3::rot_z(theta_z_deg.to_radians())
        .mul(&Mat3::rot_y(theta_y_deg.to_radians()))
        .mul(&Mat3::rot_x(theta_x_deg.to_radians()))
}

pub fn rotate_extrinsic_xyz(p: Vec3, theta_x_deg: f64, theta_y_deg: f64, theta_z_deg: f64) -> Vec3 {
    rotation_extrinsic_xyz(theta_x_deg, theta_y_deg, theta_z_deg).mul_vec(p)
}

pub const ELLIPSOID_MAX_ITERATIONS: usize = 64;
pub const ELLIPSOID_TOLERANCE: f64 = 1e-12;

/// Signed distance to an axis-aligned ellipsoid centered at the origin.
pub fn sdf_ellipsoid(p: Vec3, semi_axes: Vec3) -> Result<f64> {
    ellipsoid_closest_point(p, semi_axes).map(|(_, d)| d)
}

/// Closest surface point and signed distance for an axis-aligned ellipsoid.
///
/// The stationarity conditions give `x_i = a_i² y_i / (t + a_i²)` for the
/// Lagrange multiplier `t`, which is the unique root of
/// `F(t) = Σ (a_i y_i / (t + a_i²))² − 1` on the branch right of the
/// largest pole. `F` is convex and decreasing there, so Newton started from
/// the lower bound `max_i (a_i y_i − a_i²)` climbs monotonically to the root.
/// Points with a zero coordinate along a strictly smallest axis may instead
/// have their closest point off that coordinate plane; that case is resolved
/// in closed form at `t = −a_min²`.
pub fn ellipsoid_closest_point(p: Vec3, semi_axes: Vec3) -> Result<(Vec3, f64)> {
    let a = semi_axes.to_array();
    if a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Geometry(format!(
            "ellipsoid semi-axes must be positive, got {a:?}"
        )));
    }
    let sign = [p.x.signum(), p.y.signum(), p.z.signum()];
    let y = p.abs().to_array();
    let level: f64 = (0..3).map(|i| (y[i] / a[i]).powi(2)).sum::<f64>() - 1.0;
    let inside = level < 0.0;

    let positive: Vec<usize> = (0..3).filter(|&i| y[i] > 0.0).collect();
    let a_min2 = a.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let smallest_axis = (0..3).min_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();

    if positive.is_empty() {
        let mut x = [0.0; 3];
        x[smallest_axis] = a[smallest_axis];
        return Ok((Vec3::from(x), -a[smallest_axis]));
    }

    let a_pos_min2 = positive
        .iter()
        .map(|&i| a[i] * a[i])
        .fold(f64::INFINITY, f64::min);
    let mut lower = -a_pos_min2;

    if a_min2 < a_pos_min2 {
        // Zero coordinate along the smallest axis: test the t = −a_min² branch.
        let s: f64 = positive
            .iter()
            .map(|&i| (a[i] * y[i] / (a[i] * a[i] - a_min2)).powi(2))
            .sum();
        if s <= 1.0 {
            let mut x = [0.0; 3];
            for &i in &positive {
                x[i] = a[i] * a[i] * y[i] / (a[i] * a[i] - a_min2);
            }
            let j = (0..3)
                .find(|&j| y[j] == 0.0 && a[j] * a[j] == a_min2)
                .unwrap();
            x[j] = a[j] * (1.0 - s).max(0.0).sqrt();
            return Ok(finish(x, y, sign, inside));
        }
        lower = -a_min2;
    }

    let f = |t: f64| -> (f64, f64) {
        let mut val = -1.0;
        let mut der = 0.0;
        for &i in &positive {
            let r = a[i] * y[i] / (t + a[i] * a[i]);
            val += r * r;
            der -= 2.0 * r * r / (t + a[i] * a[i]);
        }
        (val, der)
    };

    let mut t = positive
        .iter()
        .map(|&i| a[i] * y[i] - a[i] * a[i])
        .fold(lower, f64::max);
    let mut converged = false;
    for _ in 0..ELLIPSOID_MAX_ITERATIONS {
        let (val, der) = f(t);
        if val.abs() <= ELLIPSOID_TOLERANCE {
            converged = true;
            break;
        }
        let step = -val / der;
        // Damping: never step left of the pole.
        let next = if t + step > lower { t + step } else { 0.5 * (t + lower) };
        if next == t {
            converged = val.abs() <= 1e3 * ELLIPSOID_TOLERANCE;
            break;
        }
        t = next;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "ellipsoid closest-point solve did not converge for point {:?} and semi-axes {a:?}",
            p.to_array()
        )));
    }

    let mut x = [0.0; 3];
    for &i in &positive {
        x[i] = a[i] * a[i] * y[i] / (t + a[i] * a[i]);
    }
    Ok(finish(x, y, sign, inside))
}

fn finish(x: [f64; 3], y: [f64; 3], sign: [f64; 3], inside: bool) -> (Vec3, f64) {
    let dist = (0..3).map(|i| (x[i] - y[i]).powi(2)).sum::<f64>().sqrt();
    let closest = Vec3::new(x[0] * sign[0], x[1] * sign[1], x[2] * sign[2]);
    (closest, if inside { -dist } else { dist })
}
