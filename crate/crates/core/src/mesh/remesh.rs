//! Remeshing to a uniform face count.
//!
//! Pipeline: midpoint (1→4) subdivision until the face count reaches the
//! target, quadric-error edge-collapse decimation down to the target, then
//! three rounds of tangential Laplacian relaxation with every moved vertex
//! projected back onto the input surface.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{MeshError, MeshTopology, TriangleBvh, TriangleMesh, Vec3};

pub const DEFAULT_TARGET_FACES: usize = 25_000;
const SMOOTHING_ROUNDS: usize = 3;
// Vertices whose incident face normals deviate more than this from the
// vertex normal sit on a crease and are not relaxed.
const FEATURE_COS: f64 = 0.866;
const BOUNDARY_WEIGHT: f64 = 100.0;
const MIN_COLLAPSE_QUALITY: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemeshParams {
    /// Target face count.
    pub target_resolution: usize,
    /// Accepted relative deviation from the target.
    pub tolerance_fraction: f64,
    /// Recorded for provenance; the current pipeline has no random steps.
    pub seed: u64,
}

impl Default for RemeshParams {
    fn default() -> Self {
        Self {
            target_resolution: DEFAULT_TARGET_FACES,
            tolerance_fraction: 0.02,
            seed: 0,
        }
    }
}

impl RemeshParams {
    pub fn with_target(target_resolution: usize) -> Self {
        Self {
            target_resolution,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.target_resolution < 4 {
            return Err(MeshError::InvalidParams(format!(
                "target_resolution must be >= 4, got {}",
                self.target_resolution
            )));
        }
        if !(self.tolerance_fraction > 0.0 && self.tolerance_fraction < 0.5) {
            return Err(MeshError::InvalidParams(format!(
                "tolerance_fraction must lie in (0, 0.5), got {}",
                self.tolerance_fraction
            )));
        }
        Ok(())
    }

    fn bounds(&self) -> (usize, usize) {
        let t = self.target_resolution as f64;
        let lo = (t * (1.0 - self.tolerance_fraction)).ceil() as usize;
        let hi = (t * (1.0 + self.tolerance_fraction)).floor() as usize;
        (lo, hi)
    }

    pub fn accepts(&self, face_count: usize) -> bool {
        let (lo, hi) = self.bounds();
        (lo..=hi).contains(&face_count)
    }
}

/// Remesh to `params.target_resolution` faces (± tolerance).
pub fn remesh(mesh: &TriangleMesh, params: &RemeshParams) -> Result<TriangleMesh, MeshError> {
    params.validate()?;
    let target = params.target_resolution;
    let (lo, hi) = params.bounds();
    let reference = TriangleBvh::new(mesh);

    let mut work = mesh.clone().without_colors();
    let mut rounds = 0;
    while work.face_count() < lo {
        work = subdivide_midpoint(&work);
        rounds += 1;
    }
    debug!(rounds, faces = work.face_count(), "subdivided");
    if work.face_count() > hi {
        work = decimate(&work, target)?;
        debug!(faces = work.face_count(), "decimated");
    }
    let smoothed = relax(&work, &reference, SMOOTHING_ROUNDS);
    let (out, _) = TriangleMesh::new_lenient(mesh.name(), smoothed.vertices().to_vec(), smoothed.faces().to_vec())?;
    if !params.accepts(out.face_count()) {
        return Err(MeshError::TargetUnreachable {
            target,
            achieved: out.face_count(),
        });
    }
    Ok(out)
}

/// Split every triangle into four at its edge midpoints.
pub fn subdivide_midpoint(mesh: &TriangleMesh) -> TriangleMesh {
    let mut vertices = mesh.vertices().to_vec();
    let mut mid: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.face_count() * 2);
    let mut faces = Vec::with_capacity(mesh.face_count() * 4);
    let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            vertices.push((vertices[a as usize] + vertices[b as usize]) * 0.5);
            (vertices.len() - 1) as u32
        })
    };
    for &[a, b, c] in mesh.faces() {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    TriangleMesh::from_parts_unchecked(mesh.name().to_string(), vertices, faces, None)
}

#[derive(Debug, Clone, Copy)]
struct Quadric {
    a: Matrix3<f64>,
    b: Vec3,
    c: f64,
}

impl Quadric {
    fn zero() -> Self {
        Self {
            a: Matrix3::zeros(),
            b: Vec3::zeros(),
            c: 0.0,
        }
    }

    /// Squared distance to the plane `n·p + d = 0`, scaled by `weight`.
    fn plane(n: &Vec3, d: f64, weight: f64) -> Self {
        Self {
            a: n * n.transpose() * weight,
            b: n * (d * weight),
            c: d * d * weight,
        }
    }

    fn add(&mut self, o: &Quadric) {
        self.a += o.a;
        self.b += o.b;
        self.c += o.c;
    }

    fn eval(&self, p: &Vec3) -> f64 {
        ((self.a * p).dot(p) + 2.0 * self.b.dot(p) + self.c).max(0.0)
    }

    /// Minimizer closest to `anchor`, truncating near-singular directions.
    fn minimizer(&self, anchor: &Vec3) -> Vec3 {
        let eig = SymmetricEigen::new(self.a);
        let lmax = eig.eigenvalues.amax();
        if lmax <= 0.0 {
            return *anchor;
        }
        let rhs = -self.b - self.a * anchor;
        let mut p = *anchor;
        for i in 0..3 {
            let l = eig.eigenvalues[i];
            if l > 1e-3 * lmax {
                let u = eig.eigenvectors.column(i);
                p += u * (u.dot(&rhs) / l);
            }
        }
        p
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    cost: f64,
    keep: u32,
    drop: u32,
    stamp_keep: u32,
    stamp_drop: u32,
    target: Vec3,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest collapse.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.keep.cmp(&self.keep))
            .then_with(|| other.drop.cmp(&self.drop))
    }
}

struct Decimator {
    pos: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vfaces: Vec<Vec<u32>>,
    quadric: Vec<Quadric>,
    stamp: Vec<u32>,
    boundary: Vec<bool>,
    locked: Vec<bool>,
    alive_faces: usize,
    length_weight: f64,
    heap: BinaryHeap<Candidate>,
}

impl Decimator {
    fn new(mesh: &TriangleMesh) -> Self {
        let topo = MeshTopology::build(mesh);
        let nv = mesh.vertex_count();
        let pos = mesh.vertices().to_vec();
        let faces = mesh.faces().to_vec();
        let mut vfaces = vec![Vec::new(); nv];
        let mut quadric = vec![Quadric::zero(); nv];
        let mut total_area = 0.0;
        for (fi, f) in faces.iter().enumerate() {
            let n = mesh.face_normal(fi);
            let area = mesh.face_area(fi);
            total_area += area;
            let q = Quadric::plane(&n, -n.dot(&pos[f[0] as usize]), area);
            for &v in f {
                vfaces[v as usize].push(fi as u32);
                quadric[v as usize].add(&q);
            }
        }
        let mut boundary = vec![false; nv];
        for &(a, b) in &topo.boundary_edges {
            boundary[a as usize] = true;
            boundary[b as usize] = true;
            let f = topo.edge_faces(a, b)[0] as usize;
            let e = pos[b as usize] - pos[a as usize];
            let m = e.cross(&mesh.face_normal(f));
            let len = m.norm();
            if len > 0.0 {
                let m = m / len;
                let q = Quadric::plane(&m, -m.dot(&pos[a as usize]), BOUNDARY_WEIGHT * e.norm_squared());
                quadric[a as usize].add(&q);
                quadric[b as usize].add(&q);
            }
        }
        let mut locked = vec![false; nv];
        for &(a, b) in &topo.non_manifold_edges {
            locked[a as usize] = true;
            locked[b as usize] = true;
        }
        let avg_area = total_area / faces.len().max(1) as f64;
        let mut d = Self {
            pos,
            face_alive: vec![true; faces.len()],
            alive_faces: faces.len(),
            faces,
            vfaces,
            quadric,
            stamp: vec![0; nv],
            boundary,
            locked,
            length_weight: 1e-3 * avg_area,
            heap: BinaryHeap::new(),
        };
        d.requeue_all(&topo);
        d
    }

    fn requeue_all(&mut self, topo: &MeshTopology) {
        for e in &topo.edges {
            self.push_edge(e.a, e.b);
        }
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vfaces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&x| x != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_edge(&mut self, a: u32, b: u32) {
        let (ua, ub) = (a as usize, b as usize);
        if self.locked[ua] || self.locked[ub] {
            return;
        }
        // The boundary endpoint survives so the boundary does not drift.
        let (keep, drop) = if self.boundary[ub] && !self.boundary[ua] { (b, a) } else { (a, b) };
        let (k, d) = (keep as usize, drop as usize);
        let mut q = self.quadric[k];
        q.add(&self.quadric[d]);
        let target = if self.boundary[k] && !self.boundary[d] {
            self.pos[k]
        } else {
            let mid = (self.pos[k] + self.pos[d]) * 0.5;
            let opt = q.minimizer(&mid);
            [opt, self.pos[k], self.pos[d], mid]
                .into_iter()
                .min_by(|x, y| q.eval(x).total_cmp(&q.eval(y)))
                .unwrap()
        };
        let len2 = (self.pos[k] - self.pos[d]).norm_squared();
        self.heap.push(Candidate {
            cost: q.eval(&target) + self.length_weight * len2,
            keep,
            drop,
            stamp_keep: self.stamp[k],
            stamp_drop: self.stamp[d],
            target,
        });
    }

    fn shared_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.vfaces[a as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&b))
            .collect()
    }

    fn collapse_allowed(&self, keep: u32, drop: u32, target: &Vec3) -> bool {
        let shared = self.shared_faces(keep, drop);
        match shared.len() {
            1 => {}
            2 => {
                if self.boundary[keep as usize] && self.boundary[drop as usize] {
                    return false;
                }
            }
            _ => return false,
        }
        // Link condition: common neighbors are exactly the opposite vertices.
        let nk = self.neighbors(keep);
        let nd = self.neighbors(drop);
        let common: Vec<u32> = nk.iter().copied().filter(|x| nd.binary_search(x).is_ok()).collect();
        let mut opposite: Vec<u32> = shared
            .iter()
            .map(|&f| {
                *self.faces[f as usize]
                    .iter()
                    .find(|&&x| x != keep && x != drop)
                    .unwrap()
            })
            .collect();
        opposite.sort_unstable();
        if common != opposite {
            return false;
        }

        for (moving, other) in [(keep, drop), (drop, keep)] {
            for &f in &self.vfaces[moving as usize] {
                let tri = self.faces[f as usize];
                if tri.contains(&other) {
                    continue;
                }
                let old: [Vec3; 3] = tri.map(|i| self.pos[i as usize]);
                let new: [Vec3; 3] = tri.map(|i| if i == moving { *target } else { self.pos[i as usize] });
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                let (lo, ln) = (n_old.norm(), n_new.norm());
                if ln <= 2.0 * super::DEGENERATE_AREA || n_old.dot(&n_new) < 0.2 * lo * ln {
                    return false;
                }
                let perim2 = (new[1] - new[0]).norm_squared()
                    + (new[2] - new[1]).norm_squared()
                    + (new[0] - new[2]).norm_squared();
                let quality = 2.0 * 3f64.sqrt() * ln / perim2;
                if quality < MIN_COLLAPSE_QUALITY {
                    return false;
                }
                if moving == drop {
                    // Reject if the re-pointed face duplicates an existing one.
                    let mut verts: Vec<u32> = tri.iter().map(|&i| if i == drop { keep } else { i }).collect();
                    verts.sort_unstable();
                    for &g in &self.vfaces[keep as usize] {
                        let mut gv = self.faces[g as usize].to_vec();
                        gv.sort_unstable();
                        if gv == verts {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn collapse(&mut self, keep: u32, drop: u32, target: Vec3) {
        let dropped_faces = std::mem::take(&mut self.vfaces[drop as usize]);
        for f in dropped_faces {
            let tri = self.faces[f as usize];
            if tri.contains(&keep) {
                self.face_alive[f as usize] = false;
                self.alive_faces -= 1;
                for &v in &tri {
                    if v != drop {
                        self.vfaces[v as usize].retain(|&g| g != f);
                    }
                }
            } else {
                for slot in self.faces[f as usize].iter_mut() {
                    if *slot == drop {
                        *slot = keep;
                    }
                }
                self.vfaces[keep as usize].push(f);
            }
        }
        self.pos[keep as usize] = target;
        let qd = self.quadric[drop as usize];
        self.quadric[keep as usize].add(&qd);
        self.stamp[keep as usize] += 1;
        self.stamp[drop as usize] += 1;
        for n in self.neighbors(keep) {
            self.push_edge(keep, n);
        }
    }

    fn run(&mut self, target: usize) {
        while self.alive_faces > target {
            let Some(c) = self.heap.pop() else { break };
            let (k, d) = (c.keep as usize, c.drop as usize);
            if self.stamp[k] != c.stamp_keep || self.stamp[d] != c.stamp_drop {
                continue;
            }
            if self.vfaces[k].is_empty() || self.vfaces[d].is_empty() {
                continue;
            }
            if !self.collapse_allowed(c.keep, c.drop, &c.target) {
                continue;
            }
            self.collapse(c.keep, c.drop, c.target);
        }
    }

    fn into_mesh(self, name: &str) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.pos.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(self.alive_faces);
        for (f, tri) in self.faces.iter().enumerate() {
            if !self.face_alive[f] {
                continue;
            }
            faces.push(tri.map(|v| {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = vertices.len() as u32;
                    vertices.push(self.pos[v as usize]);
                }
                remap[v as usize]
            }));
        }
        TriangleMesh::from_parts_unchecked(name.to_string(), vertices, faces, None)
    }
}

/// Quadric-error edge-collapse decimation down to at most `target` faces.
/// Stops early, without error, when no legal collapse remains.
pub(crate) fn decimate(mesh: &TriangleMesh, target: usize) -> Result<TriangleMesh, MeshError> {
    let mut dec = Decimator::new(mesh);
    for _pass in 0..3 {
        dec.run(target);
        if dec.alive_faces <= target {
            break;
        }
        // Rejected candidates may have become legal after nearby collapses.
        let snapshot = dec.into_mesh(mesh.name());
        dec = Decimator::new(&snapshot);
    }
    Ok(dec.into_mesh(mesh.name()))
}

/// Tangential uniform-Laplacian relaxation with projection onto `reference`.
/// Boundary, non-manifold and crease vertices stay fixed.
fn relax(mesh: &TriangleMesh, reference: &TriangleBvh, rounds: usize) -> TriangleMesh {
    let topo = MeshTopology::build(mesh);
    let nv = mesh.vertex_count();
    let neighbors = topo.vertex_neighbors(nv);
    let mut fixed = topo.constrained_vertices(nv);
    let normals = mesh.vertex_normals();
    let mut vfaces: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (f, tri) in mesh.faces().iter().enumerate() {
        for &v in tri {
            vfaces[v as usize].push(f);
        }
    }
    for v in 0..nv {
        if vfaces[v]
            .iter()
            .any(|&f| mesh.face_normal(f).dot(&normals[v]) < FEATURE_COS)
        {
            fixed[v] = true;
        }
    }

    let mut pos = mesh.vertices().to_vec();
    for _ in 0..rounds {
        let current = mesh.with_positions(pos.clone());
        let normals = current.vertex_normals();
        let next: Vec<Vec3> = (0..nv)
            .map(|v| {
                if fixed[v] || neighbors[v].is_empty() {
                    return pos[v];
                }
                let centroid = neighbors[v]
                    .iter()
                    .fold(Vec3::zeros(), |acc, &u| acc + pos[u as usize])
                    / neighbors[v].len() as f64;
                let d = centroid - pos[v];
                let n = normals[v];
                let tangential = d - n * d.dot(&n);
                reference.closest_point(&(pos[v] + tangential * 0.5)).0
            })
            .collect();
        pos = next;
    }
    mesh.with_positions(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    #[test]
    fn params_validation() {
        assert!(RemeshParams::with_target(3).validate().is_err());
        let mut p = RemeshParams::with_target(100);
        p.tolerance_fraction = 0.5;
        assert!(p.validate().is_err());
        p.tolerance_fraction = 0.0;
        assert!(p.validate().is_err());
        assert!(RemeshParams::with_target(100).validate().is_ok());
    }

    #[test]
    fn subdivision_quadruples() {
        let cube = primitives::unit_cube();
        let s = subdivide_midpoint(&cube);
        assert_eq!(s.face_count(), 48);
        // 8 corners + 18 edge midpoints
        assert_eq!(s.vertex_count(), 26);
        assert!((s.surface_area() - cube.surface_area()).abs() < 1e-12);
    }

    #[test]
    fn cube_to_5000() {
        let out = remesh(&primitives::unit_cube(), &RemeshParams::with_target(5000)).unwrap();
        assert!((4900..=5100).contains(&out.face_count()), "{}", out.face_count());
        let topo = MeshTopology::build(&out);
        assert!(topo.is_closed());
    }

    #[test]
    fn open_strip_subdivides_and_keeps_boundary() {
        // Three triangles in a row.
        let strip = TriangleMesh::new(
            "strip",
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2], [1, 4, 3]],
        )
        .unwrap();
        let rounds = (25_000f64 / 3.0).log(4.0).ceil() as u32;
        assert_eq!(rounds, 7);
        assert!(3 * 4usize.pow(rounds) >= 25_000 && 3 * 4usize.pow(rounds - 1) < 25_000);
        let out = remesh(&strip, &RemeshParams::with_target(25_000)).unwrap();
        assert!(RemeshParams::with_target(25_000).accepts(out.face_count()));
        // The outline is unchanged: total area and bounds are preserved.
        assert!((out.surface_area() - strip.surface_area()).abs() < 1e-9);
        assert_eq!(out.bounds(), strip.bounds());
        let topo = MeshTopology::build(&out);
        assert!(!topo.boundary_edges.is_empty());
        assert_eq!(crate::mesh::connected_components(&out).len(), 1);
    }

    #[test]
    fn in_tolerance_mesh_keeps_its_count() {
        let sphere = primitives::icosphere(1.0, 3); // 1280 faces
        let p = RemeshParams::with_target(1300);
        let out = remesh(&sphere, &p).unwrap();
        assert_eq!(out.face_count(), sphere.face_count());
    }

    #[test]
    fn deterministic() {
        let sphere = primitives::icosphere(1.0, 3);
        let p = RemeshParams::with_target(700);
        assert_eq!(remesh(&sphere, &p).unwrap(), remesh(&sphere, &p).unwrap());
    }
}
