//! Closed triangle meshes: validation, signed distance queries, and I/O.
//!
//! Unsigned distance is the minimum point-triangle distance, found through an
//! AABB tree. The sign comes from the angle-weighted pseudonormal of the
//! closest feature (face, edge, or vertex), which is exact for watertight,
//! consistently oriented meshes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::family::Aabb;
use super::vec3::Vec3;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

/// Part of a triangle that holds the closest point, in local corner indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Vertex(usize),
    Edge(usize, usize),
    Face,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub triangle: usize,
    pub point: Vec3,
    pub distance_squared: f64,
    pub feature: Feature,
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct BvhNode {
    bounds: Aabb,
    kind: NodeKind,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    edge_normals: HashMap<(usize, usize), Vec3>,
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

/// On-disk JSON mesh schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriMesh {
    /// Validates watertightness and outward orientation, then builds normals
    /// and the spatial index.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.to_array().iter().all(|c| c.is_finite())) {
            return Err(Error::Mesh(format!("vertex {i} has a non-finite coordinate")));
        }
        let mut face_normals = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Mesh(format!(
                    "triangle {t} {tri:?} references a vertex beyond {}",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let n = (b - a).cross(c - a);
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] || n.norm() == 0.0 {
                return Err(Error::Mesh(format!("triangle {t} {tri:?} is degenerate")));
            }
            face_normals.push(n.normalized());
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if let Some(prev) = directed.insert(e, t) {
                    return Err(Error::Mesh(format!(
                        "edge {e:?} appears with the same direction in triangles {prev} and {t} \
                         (inconsistent orientation or non-manifold edge)"
                    )));
                }
            }
        }
        let mut edge_normals = HashMap::new();
        for (&(u, v), &t) in &directed {
            match directed.get(&(v, u)) {
                None => {
                    return Err(Error::Mesh(format!(
                        "edge ({u}, {v}) of triangle {t} is not shared by a second triangle \
                         (mesh is not watertight)"
                    )))
                }
                Some(&t2) if u < v => {
                    edge_normals.insert((u, v), (face_normals[t] + face_normals[t2]).normalized());
                }
                Some(_) => {}
            }
        }

        let volume: f64 = triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|i| vertices[i]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum();
        if !(volume > 0.0) {
            return Err(Error::Mesh(format!(
                "signed volume {volume} is not positive (triangles must wind outward)"
            )));
        }

        let mut vertex_normals = vec![Vec3::ZERO; vertices.len()];
        for (tri, n) in triangles.iter().zip(&face_normals) {
            for k in 0..3 {
                let p = vertices[tri[k]];
                let e1 = vertices[tri[(k + 1) % 3]] - p;
                let e2 = vertices[tri[(k + 2) % 3]] - p;
                let angle = e1.cross(e2).norm().atan2(e1.dot(e2));
                vertex_normals[tri[k]] += *n * angle;
            }
        }
        for n in &mut vertex_normals {
            if n.norm() > 0.0 {
                *n = n.normalized();
            }
        }

        let mut mesh = TriMesh {
            vertices,
            triangles,
            face_normals,
            vertex_normals,
            edge_normals,
            nodes: Vec::new(),
            order: Vec::new(),
        };
        mesh.build_bvh();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        self.face_normals[t]
    }

    pub fn vertex_normal(&self, v: usize) -> Vec3 {
        self.vertex_normals[v]
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    fn triangle_bounds(&self, t: usize) -> Aabb {
        let [a, b, c] = self.triangle(t);
        Aabb {
            min: a.min(b).min(c),
            max: a.max(b).max(c),
        }
    }

    fn build_bvh(&mut self) {
        let mut order: Vec<usize> = (0..self.triangles.len()).collect();
        let centroids: Vec<Vec3> = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (a + b + c) * (1.0 / 3.0)
            })
            .collect();
        let boxes: Vec<Aabb> = (0..self.triangles.len()).map(|t| self.triangle_bounds(t)).collect();
        let mut nodes = Vec::new();
        build_node(&mut nodes, &mut order, 0, &centroids, &boxes);
        self.nodes = nodes;
        self.order = order;
    }

    fn hit_for(&self, p: Vec3, t: usize) -> ClosestHit {
        let [a, b, c] = self.triangle(t);
        let (point, feature) = closest_point_on_triangle(p, a, b, c);
        ClosestHit {
            triangle: t,
            point,
            distance_squared: (p - point).norm_squared(),
            feature,
        }
    }

    /// Nearest triangle through the AABB tree. Exact ties resolve to the
    /// lowest triangle index, matching [`TriMesh::closest_brute_force`].
    pub fn closest(&self, p: Vec3) -> ClosestHit {
        let mut best: Option<ClosestHit> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let bound = best.map_or(f64::INFINITY, |h| h.distance_squared);
            if box_distance_squared(&node.bounds, p) > bound {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start..start + count] {
                        let hit = self.hit_for(p, t);
                        if better(&hit, best.as_ref()) {
                            best = Some(hit);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = box_distance_squared(&self.nodes[left].bounds, p);
                    let dr = box_distance_squared(&self.nodes[right].bounds, p);
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.expect("validated mesh has triangles")
    }

    pub fn closest_brute_force(&self, p: Vec3) -> ClosestHit {
        let mut best: Option<ClosestHit> = None;
        for t in 0..self.triangles.len() {
            let hit = self.hit_for(p, t);
            if better(&hit, best.as_ref()) {
                best = Some(hit);
            }
        }
        best.expect("validated mesh has triangles")
    }

    fn pseudonormal(&self, hit: &ClosestHit) -> Vec3 {
        let tri = self.triangles[hit.triangle];
        match hit.feature {
            Feature::Face => self.face_normals[hit.triangle],
            Feature::Vertex(k) => self.vertex_normals[tri[k]],
            Feature::Edge(i, j) => self.edge_normals[&edge_key(tri[i], tri[j])],
        }
    }

    pub fn signed_distance(&self, p: Vec3, hit: &ClosestHit) -> f64 {
        if hit.distance_squared == 0.0 {
            return 0.0;
        }
        let d = hit.distance_squared.sqrt();
        if (p - hit.point).dot(self.pseudonormal(hit)) < 0.0 {
            -d
        } else {
            d
        }
    }

    pub fn sdf(&self, p: Vec3) -> f64 {
        self.signed_distance(p, &self.closest(p))
    }

    pub fn sdf_brute_force(&self, p: Vec3) -> f64 {
        self.signed_distance(p, &self.closest_brute_force(p))
    }

    pub fn from_mesh_file(file: MeshFile) -> Result<Self> {
        TriMesh::new(file.vertices.into_iter().map(Vec3::from).collect(), file.triangles)
    }

    pub fn to_mesh_file(&self) -> MeshFile {
        MeshFile {
            vertices: self.vertices.iter().map(|v| v.to_array()).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Parses ASCII STL, merging bit-identical vertices.
    pub fn from_stl_ascii(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            record: line,
            message,
        };
        let mut index: HashMap<[u64; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut corners: Vec<usize> = Vec::new();
        let mut saw_solid = false;
        for (ln, line) in text.lines().enumerate() {
            let ln = ln + 1;
            let mut tok = line.split_whitespace();
            match tok.next() {
                None => {}
                Some("solid") => saw_solid = true,
                Some("vertex") => {
                    let coords: Vec<f64> = tok
                        .map(|t| t.parse::<f64>().map_err(|e| err(ln, format!("bad coordinate '{t}': {e}"))))
                        .collect::<Result<_>>()?;
                    if coords.len() != 3 {
                        return Err(err(ln, format!("vertex needs 3 coordinates, got {}", coords.len())));
                    }
                    let key = [coords[0].to_bits(), coords[1].to_bits(), coords[2].to_bits()];
                    let id = *index.entry(key).or_insert_with(|| {
                        vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                        vertices.len() - 1
                    });
                    corners.push(id);
                }
                Some("endloop") => {
                    if corners.len() != 3 {
                        return Err(err(ln, format!("facet loop has {} vertices, expected 3", corners.len())));
                    }
                    triangles.push([corners[0], corners[1], corners[2]]);
                    corners.clear();
                }
                Some("facet" | "outer" | "endfacet" | "endsolid") => {}
                Some(other) => return Err(err(ln, format!("unexpected keyword '{other}'"))),
            }
        }
        if !saw_solid {
            return Err(err(1, "missing 'solid' header".into()));
        }
        TriMesh::new(vertices, triangles)
    }

    pub fn to_stl_ascii(&self, name: &str) -> String {
        let mut s = format!("solid {name}\n");
        for (t, n) in self.face_normals.iter().enumerate() {
            s.push_str(&format!("  facet normal {} {} {}\n    outer loop\n", n.x, n.y, n.z));
            for v in self.triangle(t) {
                s.push_str(&format!("      vertex {} {} {}\n", v.x, v.y, v.z));
            }
            s.push_str("    endloop\n  endfacet\n");
        }
        s.push_str(&format!("endsolid {name}\n"));
        s
    }

    /// Loads `.stl` (ASCII) or `.json` meshes.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("stl") => Self::from_stl_ascii(&text, path),
            Some("json") => {
                let file: MeshFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: PathBuf::from(path),
                    record: e.line(),
                    message: e.to_string(),
                })?;
                Self::from_mesh_file(file)
            }
            _ => Err(Error::Usage(format!(
                "{}: mesh files must be .stl or .json",
                path.display()
            ))),
        }
    }
}

fn better(hit: &ClosestHit, best: Option<&ClosestHit>) -> bool {
    match best {
        None => true,
        Some(b) => {
            hit.distance_squared < b.distance_squared
                || (hit.distance_squared == b.distance_squared && hit.triangle < b.triangle)
        }
    }
}

fn box_distance_squared(b: &Aabb, p: Vec3) -> f64 {
    let d = (b.min - p).max(p - b.max).max(Vec3::ZERO);
    d.norm_squared()
}

fn union(a: &Aabb, b: &Aabb) -> Aabb {
    Aabb {
        min: a.min.min(b.min),
        max: a.max.max(b.max),
    }
}

fn build_node(
    nodes: &mut Vec<BvhNode>,
    order: &mut [usize],
    offset: usize,
    centroids: &[Vec3],
    boxes: &[Aabb],
) -> usize {
    let bounds = order[1..]
        .iter()
        .fold(boxes[order[0]], |acc, &t| union(&acc, &boxes[t]));
    let me = nodes.len();
    nodes.push(BvhNode {
        bounds,
        kind: NodeKind::Leaf {
            start: offset,
            count: order.len(),
        },
    });
    if order.len() <= LEAF_SIZE {
        return me;
    }
    let (lo, hi) = order[1..].iter().fold(
        (centroids[order[0]], centroids[order[0]]),
        |(lo, hi), &t| (lo.min(centroids[t]), hi.max(centroids[t])),
    );
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] == 0.0 {
        return me;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(nodes, left_part, offset, centroids, boxes);
    let right = build_node(nodes, right_part, offset + mid, centroids, boxes);
    nodes[me].kind = NodeKind::Inner { left, right };
    me
}

/// Closest point on triangle `abc` to `p` and the feature it lies on.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Signed distance through the spatial index.
pub fn mesh_sdf(p: Vec3, m: &TriMesh) -> f64 {
    m.sdf(p)
}

/// Signed distance by scanning every triangle.
pub fn brute_force_sdf(p: Vec3, m: &TriMesh) -> f64 {
    m.sdf_brute_force(p)
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(|v| Vec3::from(v).normalized())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *cache.entry(edge_key(a, b)).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalized());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriMesh::new(verts, faces).expect("icosphere is closed and outward")
}

/// Origin-centered box whose faces are split into `n × n` quad grids.
pub fn box_mesh(half: Vec3, n: usize) -> TriMesh {
    let n = n.max(1);
    let coord = |axis: usize, i: usize| -> f64 {
        if i == 0 {
            -half[axis]
        } else if i == n {
            half[axis]
        } else {
            -half[axis] + 2.0 * half[axis] * (i as f64) / (n as f64)
        }
    };
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut verts: Vec<Vec3> = Vec::new();
    let mut tris = Vec::new();
    for k in 0..3 {
        let (u, v) = ((k + 1) % 3, (k + 2) % 3);
        for outward in [false, true] {
            let mut id = |i: usize, j: usize| {
                let mut p = [0.0; 3];
                p[k] = if outward { half[k] } else { -half[k] };
                p[u] = coord(u, i);
                p[v] = coord(v, j);
                let key = p.map(f64::to_bits);
                *index.entry(key).or_insert_with(|| {
                    verts.push(Vec3::from(p));
                    verts.len() - 1
                })
            };
            for i in 0..n {
                for j in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    if outward {
                        tris.push([a, b, c]);
                        tris.push([a, c, d]);
                    } else {
                        tris.push([a, c, b]);
                        tris.push([a, d, c]);
                    }
                }
            }
        }
    }
    TriMesh::new(verts, tris).expect("box mesh is closed and outward")
}
