//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use geom_deeponet::dataset::{fit_stats, generate_dataset, CaseRecord, GenConfig, ResampledBatch, ResampledSet};
use geom_deeponet::geometry::{icosphere, mesh_sdf, sample_design, sdf_ellipsoid, ShapeFamily, Solid, TriMesh, Vec3};
use geom_deeponet::model::{Dense, LayerActivation, Model};
use geom_deeponet::tensor::{ParamStore, Tape, Tensor, Var};
use geom_deeponet::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// Contractions by explicit index arithmetic, hidden index outermost.

pub fn ref_dot_hidden(branch: &Tensor, trunk: &Tensor) -> Vec<f64> {
    let s = trunk.shape();
    let (nb, ni, nh) = (s[0], s[1], s[2]);
    let mut out = vec![0.0; nb * ni];
    for h in 0..nh {
        for b in 0..nb {
            for i in 0..ni {
                out[b * ni + i] += branch.at(&[b, h]) * trunk.at(&[b, i, h]);
            }
        }
    }
    out
}

pub fn ref_fuse(branch: &Tensor, trunk: &Tensor) -> Vec<f64> {
    let s = trunk.shape();
    let (nb, ni, nh) = (s[0], s[1], s[2]);
    let mut out = vec![0.0; nb * ni * nh];
    for h in 0..nh {
        for b in 0..nb {
            for i in 0..ni {
                out[(b * ni + i) * nh + h] = branch.at(&[b, h]) * trunk.at(&[b, i, h]);
            }
        }
    }
    out
}

pub fn ref_contract(branch: &Tensor, trunk: &Tensor) -> Vec<f64> {
    let s = trunk.shape();
    let (nb, ni, nh, nc) = (s[0], s[1], s[2], s[3]);
    let mut out = vec![0.0; nb * ni * nc];
    for h in 0..nh {
        for c in 0..nc {
            for b in 0..nb {
                for i in 0..ni {
                    out[(b * ni + i) * nc + c] += branch.at(&[b, h, c]) * trunk.at(&[b, i, h, c]);
                }
            }
        }
    }
    out
}

// Gradient checks by central differences.

pub const FD_STEP: f64 = 1e-6;

/// `‖a − f‖ / max(‖a‖, ‖f‖)`; zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, f)| a - f).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub type LossFn<'a> = dyn Fn(&mut Tape, &ParamStore, &[Var]) -> Result<Var> + 'a;

fn loss_value(store: &ParamStore, inputs: &[Tensor], f: &LossFn) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let loss = f(&mut tape, store, &vars).unwrap();
    tape.value(loss).item().unwrap()
}

/// Largest per-tensor relative error over every input and parameter.
pub fn gradient_check(store: &ParamStore, inputs: &[Tensor], f: &LossFn) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let loss = f(&mut tape, store, &vars).unwrap();
    let grads = tape.gradients(loss).unwrap();
    let mut with_grads = store.clone();
    tape.backward(loss, &mut with_grads).unwrap();

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).map_or_else(|| vec![0.0; inputs[k].numel()], |g| g.data().to_vec());
        let mut numeric = Vec::with_capacity(analytic.len());
        for e in 0..inputs[k].numel() {
            let x0 = work[k].data()[e];
            work[k].data_mut()[e] = x0 + FD_STEP;
            let up = loss_value(store, &work, f);
            work[k].data_mut()[e] = x0 - FD_STEP;
            let down = loss_value(store, &work, f);
            work[k].data_mut()[e] = x0;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    let mut perturbed = store.clone();
    for (pi, p) in with_grads.iter().enumerate() {
        let analytic = p.grad.data().to_vec();
        let mut numeric = Vec::with_capacity(analytic.len());
        for e in 0..analytic.len() {
            let x0 = perturbed.iter().nth(pi).unwrap().value.data()[e];
            set_param(&mut perturbed, pi, e, x0 + FD_STEP);
            let up = loss_value(&perturbed, inputs, f);
            set_param(&mut perturbed, pi, e, x0 - FD_STEP);
            let down = loss_value(&perturbed, inputs, f);
            set_param(&mut perturbed, pi, e, x0);
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

fn set_param(store: &mut ParamStore, index: usize, element: usize, value: f64) {
    store.iter_mut().nth(index).unwrap().value.data_mut()[element] = value;
}

/// `Σ y ⊙ probe` so that every output element carries a distinct weight.
fn probed(tape: &mut Tape, y: Var, probe: &Tensor) -> Result<Var> {
    let p = tape.constant(probe.clone());
    let m = tape.mul(y, p)?;
    Ok(tape.sum(m))
}

/// Worst relative error for each layer type and contraction op on random
/// O(1) inputs.
pub fn layer_checks(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let (nb, ni, nh, nc, d_in) = (2, 3, 4, 3, 5);
    let mut out = Vec::new();
    for (name, activation) in [
        ("dense identity", LayerActivation::Identity),
        ("dense tanh", LayerActivation::Tanh),
        ("dense relu", LayerActivation::Relu),
        ("sine w0=30", LayerActivation::Sine(30.0)),
    ] {
        let mut store = ParamStore::new();
        let weight = store.add("w", random_tensor(&mut r, &[d_in, nh]));
        let bias = store.add("b", random_tensor(&mut r, &[nh]));
        let layer = Dense { weight, bias, activation };
        let x = random_tensor(&mut r, &[nb, ni, d_in]);
        let probe = random_tensor(&mut r, &[nb, ni, nh]);
        let f = move |t: &mut Tape, s: &ParamStore, v: &[Var]| {
            let y = layer.apply(t, s, v[0])?;
            probed(t, y, &probe)
        };
        out.push((name, gradient_check(&store, &[x], &f)));
    }
    let empty = ParamStore::new();

    let (b, t) = (random_tensor(&mut r, &[nb, nh]), random_tensor(&mut r, &[nb, ni, nh]));
    let probe = random_tensor(&mut r, &[nb, ni]);
    let f = move |tp: &mut Tape, _: &ParamStore, v: &[Var]| {
        let y = tp.dot_hidden(v[0], v[1])?;
        probed(tp, y, &probe)
    };
    out.push(("dot_hidden", gradient_check(&empty, &[b, t], &f)));

    let (b, t) = (random_tensor(&mut r, &[nb, nh]), random_tensor(&mut r, &[nb, ni, nh]));
    let probe = random_tensor(&mut r, &[nb, ni, nh]);
    let f = move |tp: &mut Tape, _: &ParamStore, v: &[Var]| {
        let y = tp.fuse(v[0], v[1])?;
        probed(tp, y, &probe)
    };
    out.push(("fuse", gradient_check(&empty, &[b, t], &f)));

    let (b, t) = (random_tensor(&mut r, &[nb, nh, nc]), random_tensor(&mut r, &[nb, ni, nh, nc]));
    let probe = random_tensor(&mut r, &[nb, ni, nc]);
    let f = move |tp: &mut Tape, _: &ParamStore, v: &[Var]| {
        let y = tp.contract_vector(v[0], v[1])?;
        probed(tp, y, &probe)
    };
    out.push(("contract_vector", gradient_check(&empty, &[b, t], &f)));

    let (p, q) = (random_tensor(&mut r, &[nb, ni, nc]), random_tensor(&mut r, &[nb, ni, nc]));
    let f = |tp: &mut Tape, _: &ParamStore, v: &[Var]| tp.mse(v[0], v[1]);
    out.push(("mse", gradient_check(&empty, &[p, q], &f)));
    out
}

/// Gradient check of a model's batch loss with respect to every parameter.
pub fn model_gradient_check(model: &Model, batch: &ResampledBatch) -> f64 {
    let mut tape = Tape::new();
    let loss = model.batch_loss(&mut tape, batch).unwrap();
    let mut analytic = model.params().clone();
    tape.backward(loss, &mut analytic).unwrap();

    let value = |m: &Model| {
        let mut t = Tape::new();
        let l = m.batch_loss(&mut t, batch).unwrap();
        t.value(l).item().unwrap()
    };
    let mut work = model.clone();
    let mut worst = 0.0f64;
    for (pi, p) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(p.grad.numel());
        for e in 0..p.grad.numel() {
            let x0 = p.value.data()[e];
            set_param(work.params_mut(), pi, e, x0 + FD_STEP);
            let up = value(&work);
            set_param(work.params_mut(), pi, e, x0 - FD_STEP);
            let down = value(&work);
            set_param(work.params_mut(), pi, e, x0);
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        worst = worst.max(relative_error(p.grad.data(), &numeric));
    }
    worst
}

pub fn small_cases(family: ShapeFamily, count: usize, c: usize, seed: u64) -> Vec<CaseRecord> {
    generate_dataset(&GenConfig {
        family,
        count,
        min_points: 30,
        max_points: 60,
        c,
        seed,
    })
    .unwrap()
    .cases
}

/// A scaled batch of `b` cases with `n` resampled nodes each.
pub fn small_batch(family: ShapeFamily, c: usize, b: usize, n: usize, seed: u64) -> (ResampledBatch, Vec<CaseRecord>) {
    let cases = small_cases(family, b.max(2), c, seed);
    let stats = fit_stats(&cases).unwrap();
    let set = ResampledSet::build(&cases, &stats, n, seed).unwrap();
    let idx: Vec<usize> = (0..b).collect();
    (set.batch(&idx).unwrap(), cases)
}

// Geometry oracles.

fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

/// Distance to a triangle: plane projection when it lands inside, else
/// the nearest of the three edges.
pub fn triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let n = (b - a).cross(c - a);
    let q = p - n * ((p - a).dot(n) / n.norm_squared());
    let inside = n.dot((b - a).cross(q - a)) >= 0.0 && n.dot((c - b).cross(q - b)) >= 0.0 && n.dot((a - c).cross(q - c)) >= 0.0;
    if inside {
        return (p - q).norm();
    }
    [closest_on_segment(p, a, b), closest_on_segment(p, b, c), closest_on_segment(p, c, a)]
        .iter()
        .map(|x| (p - *x).norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn brute_unsigned(p: Vec3, mesh: &TriMesh) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            triangle_distance(p, a, b, c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Membership in a convex mesh containing its centroid: inside every face plane.
pub fn convex_inside(p: Vec3, mesh: &TriMesh) -> bool {
    let centroid = mesh.vertices().iter().fold(Vec3::ZERO, |s, v| s + *v) * (1.0 / mesh.vertices().len() as f64);
    (0..mesh.triangles().len()).all(|t| {
        let [a, b, c] = mesh.triangle(t);
        let mut n = (b - a).cross(c - a);
        if n.dot(a - centroid) < 0.0 {
            n = -n;
        }
        (p - a).dot(n) < 0.0
    })
}

fn ellipsoid_point(axes: Vec3, theta: f64, phi: f64) -> Vec3 {
    Vec3::new(axes.x * theta.sin() * phi.cos(), axes.y * theta.sin() * phi.sin(), axes.z * theta.cos())
}

/// Signed distance to an axis-aligned ellipsoid from `per_dim²` surface
/// samples on a `(θ, φ)` grid, then a shrinking pattern search around the
/// nearest sample.
pub fn ellipsoid_dense_sdf(p: Vec3, axes: Vec3, per_dim: usize) -> f64 {
    let dt = std::f64::consts::PI / per_dim as f64;
    let dp = 2.0 * std::f64::consts::PI / per_dim as f64;
    let ring: Vec<(f64, f64)> = (0..per_dim).map(|j| (j as f64 * dp).sin_cos()).collect();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..per_dim {
        let theta = (i as f64 + 0.5) * dt;
        let (st, ct) = theta.sin_cos();
        for (j, &(sp, cp)) in ring.iter().enumerate() {
            let phi = j as f64 * dp;
            let q = Vec3::new(axes.x * st * cp, axes.y * st * sp, axes.z * ct);
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, theta, phi);
            }
        }
    }
    let (mut d2, mut theta, mut phi) = best;
    let mut step = dt.max(dp);
    while step > 1e-13 {
        let mut moved = false;
        for (a, b) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let q = ellipsoid_point(axes, theta + a, phi + b);
            let d = (p - q).norm_squared();
            if d < d2 {
                (d2, theta, phi, moved) = (d, theta + a, phi + b, true);
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let level = (p.x / axes.x).powi(2) + (p.y / axes.y).powi(2) + (p.z / axes.z).powi(2);
    if level < 1.0 {
        -d2.sqrt()
    } else {
        d2.sqrt()
    }
}

fn ray_box(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3) -> Vec<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        let a = (lo[k] - o[k]) / d[k];
        let b = (hi[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    if t0 <= t1 {
        vec![t0, t1]
    } else {
        vec![]
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return vec![];
    }
    let s = disc.sqrt();
    vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
}

fn strictly_in_box(p: Vec3, lo: Vec3, hi: Vec3) -> bool {
    (0..3).all(|k| p[k] > lo[k] && p[k] < hi[k])
}

/// Membership by counting boundary crossings of a ray from `p`.
pub fn ray_parity_inside(solid: &Solid, p: Vec3, dir: Vec3) -> bool {
    let at = |t: f64| p + dir * t;
    let mut crossings = 0;
    match solid {
        Solid::Beam { half, center, hole_center, hole_radius } => {
            let (lo, hi) = (*center - *half, *center + *half);
            let in_hole = |q: Vec3| (q.x - hole_center.x).powi(2) + (q.y - hole_center.y).powi(2) < hole_radius * hole_radius;
            for t in ray_box(p, dir, lo, hi) {
                if t > 0.0 && !in_hole(at(t)) {
                    crossings += 1;
                }
            }
            let (ox, oy) = (p.x - hole_center.x, p.y - hole_center.y);
            let a = dir.x * dir.x + dir.y * dir.y;
            let b = 2.0 * (ox * dir.x + oy * dir.y);
            let c = ox * ox + oy * oy - hole_radius * hole_radius;
            for t in quadratic_roots(a, b, c) {
                if t > 0.0 && strictly_in_box(at(t), lo, hi) {
                    crossings += 1;
                }
            }
        }
        Solid::Cuboid { half, rotation, semi_axes } => {
            let (lo, hi) = (-*half, *half);
            let rt = rotation.transpose();
            let (lp, ld) = (rt.mul_vec(p), rt.mul_vec(dir));
            let scale = |v: Vec3| Vec3::new(v.x / semi_axes.x, v.y / semi_axes.y, v.z / semi_axes.z);
            let (sp, sd) = (scale(lp), scale(ld));
            let in_void = |q: Vec3| scale(rt.mul_vec(q)).norm_squared() < 1.0;
            for t in ray_box(p, dir, lo, hi) {
                if t > 0.0 && !in_void(at(t)) {
                    crossings += 1;
                }
            }
            for t in quadratic_roots(sd.norm_squared(), 2.0 * sp.dot(sd), sp.norm_squared() - 1.0) {
                if t > 0.0 && strictly_in_box(at(t), lo, hi) {
                    crossings += 1;
                }
            }
        }
    }
    crossings % 2 == 1
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Mesh SDF against brute force and the convex sign test around an icosphere.
/// Returns the largest `|Δ|` and the number of sign disagreements.
pub fn icosphere_check(queries: usize, seed: u64) -> (f64, usize) {
    let mesh = icosphere(1.0, 3);
    let mut r = rng(seed);
    let (mut worst, mut wrong_sign) = (0.0f64, 0);
    for _ in 0..queries {
        let p = Vec3::new(r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
        let d = mesh_sdf(p, &mesh);
        let oracle = brute_unsigned(p, &mesh);
        worst = worst.max((d.abs() - oracle).abs());
        if oracle > 1e-12 && (d < 0.0) != convex_inside(p, &mesh) {
            wrong_sign += 1;
        }
    }
    (worst, wrong_sign)
}

/// Largest relative error of the ellipsoid SDF against the dense-surface oracle.
pub fn ellipsoid_check(shapes: usize, per_shape: usize, per_dim: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..shapes {
        let axes = Vec3::new(r.gen_range(0.5..3.0), r.gen_range(0.5..3.0), r.gen_range(0.5..3.0));
        for _ in 0..per_shape {
            let p = Vec3::new(
                r.gen_range(-2.0..2.0) * axes.x,
                r.gen_range(-2.0..2.0) * axes.y,
                r.gen_range(-2.0..2.0) * axes.z,
            );
            let oracle = ellipsoid_dense_sdf(p, axes, per_dim);
            if oracle.abs() < 1e-3 {
                continue;
            }
            let d = sdf_ellipsoid(p, axes).unwrap();
            worst = worst.max((d - oracle).abs() / oracle.abs());
        }
    }
    worst
}

/// Largest `|sdf − (|p| − r)|` for equal semi-axes.
pub fn sphere_check(queries: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..queries {
        let radius = r.gen_range(0.1..5.0);
        let p = Vec3::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)) * radius;
        let d = sdf_ellipsoid(p, Vec3::splat(radius)).unwrap();
        worst = worst.max((d - (p.norm() - radius)).abs());
    }
    worst
}

/// Sign of the family SDF against ray parity at `points` locations spread
/// over random designs. Returns disagreements and points compared.
pub fn parity_check(family: ShapeFamily, points: usize, seed: u64) -> (usize, usize) {
    const PER_DESIGN: usize = 100;
    let mut r = rng(seed);
    let (mut wrong, mut compared) = (0, 0);
    while compared < points {
        let Ok(solid) = Solid::from_design(&sample_design(family, &mut r)) else {
            continue;
        };
        let bb = solid.bounding_box();
        let pad = (bb.max - bb.min) * 0.1;
        let (lo, hi) = (bb.min - pad, bb.max + pad);
        for _ in 0..PER_DESIGN.min(points - compared) {
            let p = Vec3::new(r.gen_range(lo.x..hi.x), r.gen_range(lo.y..hi.y), r.gen_range(lo.z..hi.z));
            let d = solid.sdf(p).unwrap();
            if d.abs() < 1e-9 {
                continue;
            }
            let dir = random_unit(&mut r);
            if (d < 0.0) != ray_parity_inside(&solid, p, dir) {
                wrong += 1;
            }
            compared += 1;
        }
    }
    (wrong, compared)
}
