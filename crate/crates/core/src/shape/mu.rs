use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ShapeError;
use crate::mesh::TriangleMesh;

pub const DEFAULT_BASE_POINTS: usize = 400;

/// Normalized geodesic-integral function over the vertices of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuField {
    /// One value per vertex in `[0, 1]`. Vertices not used by any face get 0.
    pub values: Vec<f64>,
    pub base_points: Vec<u32>,
    pub total_area: f64,
    /// Coefficient of variation of μ before normalization.
    pub raw_cv: f64,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl MuField {
    /// `(μ − min) / max`: the field used for interval binning. Unlike the
    /// min-max normalized `values`, a nearly constant μ stays near zero
    /// instead of stretching sampling noise across the whole range.
    pub fn binning_values(&self) -> Vec<f64> {
        let scale = if self.raw_max > 0.0 {
            (self.raw_max - self.raw_min) / self.raw_max
        } else {
            0.0
        };
        self.values.iter().map(|v| v * scale).collect()
    }
}

/// Vertex adjacency of the edge graph with Euclidean edge lengths.
pub(crate) struct EdgeGraph {
    offsets: Vec<usize>,
    targets: Vec<(u32, f64)>,
}

impl EdgeGraph {
    pub(crate) fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.vertex_count();
        let v = mesh.vertices();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(mesh.face_count() * 6);
        for f in mesh.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                pairs.push((a, b));
                pairs.push((b, a));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; n + 1];
        for &(a, _) in &pairs {
            offsets[a as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = pairs
            .iter()
            .map(|&(a, b)| (b, (v[a as usize] - v[b as usize]).norm()))
            .collect();
        Self { offsets, targets }
    }

    fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub(crate) fn dijkstra(&self, source: usize, dist: &mut [f64]) {
        #[derive(PartialEq)]
        struct Item(f64, u32);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
            }
        }
        dist.fill(f64::INFINITY);
        dist[source] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, source as u32)]);
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(w, len) in self.neighbors(u as usize) {
                let nd = d + len;
                if nd < dist[w as usize] {
                    dist[w as usize] = nd;
                    heap.push(Item(nd, w));
                }
            }
        }
    }
}

/// Compute μ(v) = Σ_b g(v, b)·area(b) over farthest-point base samples.
///
/// `area(b)` is the surface area of the vertices geodesically closest to b.
pub fn compute_mu(mesh: &TriangleMesh, num_base_points: usize, seed: u64) -> Result<MuField, ShapeError> {
    if mesh.face_count() == 0 {
        return Err(ShapeError::EmptyMesh);
    }
    if num_base_points == 0 {
        return Err(ShapeError::InvalidParams("num_base_points must be at least 1".into()));
    }
    let n = mesh.vertex_count();
    let mut used = vec![false; n];
    let mut vertex_area = vec![0.0; n];
    for (f, face) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(f) / 3.0;
        for &v in face {
            used[v as usize] = true;
            vertex_area[v as usize] += a;
        }
    }
    let used_idx: Vec<usize> = (0..n).filter(|&v| used[v]).collect();
    let graph = EdgeGraph::build(mesh);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = used_idx[rng.random_range(0..used_idx.len())];
    let count = num_base_points.min(used_idx.len());
    let mut base_points = Vec::with_capacity(count);
    let mut rows: Vec<Vec<f32>> = Vec::with_capacity(count);
    let mut nearest = vec![f64::INFINITY; n];
    let mut owner = vec![0u32; n];
    let mut dist = vec![0.0; n];
    let mut next = first;
    for b in 0..count {
        graph.dijkstra(next, &mut dist);
        if b == 0 {
            if used_idx.iter().any(|&v| !dist[v].is_finite()) {
                let components = crate::mesh::connected_components(mesh).len();
                return Err(ShapeError::Disconnected { components });
            }
        }
        base_points.push(next as u32);
        rows.push(dist.iter().map(|&d| d as f32).collect());
        for &v in &used_idx {
            // Equidistant vertices stay with the earlier base point.
            if dist[v] < nearest[v] * (1.0 - 1e-9) {
                owner[v] = b as u32;
            }
            nearest[v] = nearest[v].min(dist[v]);
        }
        // Farthest remaining vertex; lowest index among near-ties so that
        // rounding noise from a rigid motion cannot flip the choice.
        let max = used_idx.iter().map(|&v| nearest[v]).fold(0.0, f64::max);
        let cut = max * (1.0 - 1e-9);
        let far = *used_idx.iter().find(|&&v| nearest[v] >= cut).unwrap();
        if nearest[far] == 0.0 {
            break;
        }
        next = far;
    }

    let mut base_area = vec![0.0; base_points.len()];
    for &v in &used_idx {
        base_area[owner[v] as usize] += vertex_area[v];
    }
    let mut raw = vec![0.0; n];
    for &v in &used_idx {
        raw[v] = rows
            .iter()
            .zip(&base_area)
            .map(|(row, &a)| row[v] as f64 * a)
            .sum();
    }

    let total_area: f64 = vertex_area.iter().sum();
    let count_used = used_idx.len() as f64;
    let mean = used_idx.iter().map(|&v| raw[v]).sum::<f64>() / count_used;
    let var = used_idx.iter().map(|&v| (raw[v] - mean).powi(2)).sum::<f64>() / count_used;
    let raw_cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };

    let lo = used_idx.iter().map(|&v| raw[v]).fold(f64::INFINITY, f64::min);
    let hi = used_idx.iter().map(|&v| raw[v]).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let values = (0..n)
        .map(|v| {
            if !used[v] || !(span > 1e-6 * hi.abs()) {
                0.0
            } else {
                ((raw[v] - lo) / span).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(MuField {
        values,
        base_points,
        total_area,
        raw_cv,
        raw_min: lo,
        raw_max: hi,
    })
}
