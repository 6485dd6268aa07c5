use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::mu::compute_mu;
use super::{ShapeError, ShapeParams};
use crate::mesh::{MeshTopology, TriangleMesh};

/// One connected region of faces whose μ falls in a single interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrgNode {
    /// Interval index within the level, `0..2^r`.
    pub interval: u32,
    /// Region area over total mesh area.
    pub area: f64,
    /// Region μ-extent over the sum of extents at this level.
    pub length: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub parent: Option<u32>,
    /// Same-level nodes in adjacent intervals that share a mesh edge.
    pub neighbors: Vec<u32>,
    pub face_count: u32,
}

/// Multiresolution Reeb graph. Level `r` splits the μ range into `2^r`
/// intervals; nodes within a level are in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mrg {
    pub resolution: u32,
    pub total_area: f64,
    pub face_count: u32,
    pub levels: Vec<Vec<MrgNode>>,
}

impl Mrg {
    pub fn finest(&self) -> &[MrgNode] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }
}

/// Binning field for every vertex (see [`MuField::binning_values`]),
/// computed per connected component so that a multi-shell mesh still gets a
/// well-defined field.
pub fn mu_by_component(mesh: &TriangleMesh, base_points: usize, seed: u64) -> Result<Vec<f64>, ShapeError> {
    let topology = MeshTopology::build(mesh);
    let (labels, count) = crate::mesh::face_components(&topology);
    if count <= 1 {
        return Ok(compute_mu(mesh, base_points, seed)?.binning_values());
    }
    let mut values = vec![0.0; mesh.vertex_count()];
    for c in 0..count {
        let faces: Vec<usize> = (0..mesh.face_count()).filter(|&f| labels[f] as usize == c).collect();
        let part = mesh.submesh(&faces)?;
        let mu = compute_mu(&part, base_points, seed)?.binning_values();
        // submesh numbers vertices in order of first appearance.
        let mut seen = std::collections::HashMap::new();
        for &f in &faces {
            for &v in &mesh.faces()[f] {
                let next = seen.len();
                let local = *seen.entry(v).or_insert(next);
                values[v as usize] = mu[local];
            }
        }
    }
    Ok(values)
}

/// μ followed by [`build_mrg`].
pub fn describe(mesh: &TriangleMesh, params: &ShapeParams) -> Result<Mrg, ShapeError> {
    params.validate()?;
    let mu = mu_by_component(mesh, params.base_points, params.seed)?;
    build_mrg(mesh, &mu, params.resolution)
}

/// Bin faces by mean vertex μ (values in `[0, 1]`) and build the interval
/// hierarchy.
pub fn build_mrg(mesh: &TriangleMesh, mu: &[f64], resolution: u32) -> Result<Mrg, ShapeError> {
    if resolution == 0 || resolution > 16 {
        return Err(ShapeError::InvalidParams(format!("resolution {resolution} not in 1..=16")));
    }
    if mu.len() != mesh.vertex_count() {
        return Err(ShapeError::InvalidParams(format!(
            "mu has {} values for {} vertices",
            mu.len(),
            mesh.vertex_count()
        )));
    }
    let nf = mesh.face_count();
    if nf == 0 {
        return Err(ShapeError::EmptyMesh);
    }
    let faces = mesh.faces();
    let bins = 1u32 << resolution;
    let finest: Vec<u32> = faces
        .iter()
        .map(|f| {
            let m = (mu[f[0] as usize] + mu[f[1] as usize] + mu[f[2] as usize]) / 3.0;
            ((m * bins as f64).floor().max(0.0) as u32).min(bins - 1)
        })
        .collect();
    let areas = mesh.face_areas();
    let total_area: f64 = areas.iter().sum();
    let topology = MeshTopology::build(mesh);

    let mut levels: Vec<Vec<MrgNode>> = Vec::with_capacity(resolution as usize + 1);
    let mut prev_node_of_face: Vec<u32> = Vec::new();
    for r in 0..=resolution {
        let shift = resolution - r;
        let interval = |f: usize| finest[f] >> shift;
        let width = 1.0 / (1u32 << r) as f64;

        // Flood fill regions of equal interval.
        let mut region = vec![u32::MAX; nf];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for seed in 0..nf {
            if region[seed] != u32::MAX {
                continue;
            }
            let id = members.len() as u32;
            let mut list = vec![seed];
            region[seed] = id;
            let mut queue = VecDeque::from([seed]);
            while let Some(f) = queue.pop_front() {
                for &g in &topology.face_adjacency[f] {
                    let g = g as usize;
                    if region[g] == u32::MAX && interval(g) == interval(f) {
                        region[g] = id;
                        list.push(g);
                        queue.push_back(g);
                    }
                }
            }
            members.push(list);
        }

        let mut nodes: Vec<(MrgNode, usize)> = members
            .iter()
            .map(|list| {
                let i = interval(list[0]);
                let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
                let mut mu_min = f64::INFINITY;
                let mut mu_max = f64::NEG_INFINITY;
                for &f in list {
                    for &v in &faces[f] {
                        mu_min = mu_min.min(mu[v as usize]);
                        mu_max = mu_max.max(mu[v as usize]);
                    }
                }
                let extent = (mu_max.min(hi) - mu_min.max(lo)).max(0.0);
                let area: f64 = list.iter().map(|&f| areas[f]).sum();
                let node = MrgNode {
                    interval: i,
                    area: if total_area > 0.0 { area / total_area } else { 1.0 / members.len() as f64 },
                    length: extent,
                    mu_min,
                    mu_max,
                    parent: (r > 0).then(|| prev_node_of_face[list[0]]),
                    neighbors: Vec::new(),
                    face_count: list.len() as u32,
                };
                (node, *list.iter().min().unwrap())
            })
            .collect();

        let extent_sum: f64 = nodes.iter().map(|(n, _)| n.length).sum();
        let count = nodes.len() as f64;
        for (n, _) in &mut nodes {
            n.length = if extent_sum > 0.0 { n.length / extent_sum } else { 1.0 / count };
        }

        // Canonical order: interval, then larger regions first.
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, fa) = &nodes[a];
            let (nb, fb) = &nodes[b];
            na.interval
                .cmp(&nb.interval)
                .then(nb.area.total_cmp(&na.area))
                .then(nb.length.total_cmp(&na.length))
                .then(fa.cmp(fb))
        });
        let mut rank = vec![0u32; nodes.len()];
        for (pos, &old) in order.iter().enumerate() {
            rank[old] = pos as u32;
        }

        let mut neighbor_sets: Vec<Vec<u32>> = vec![Vec::new(); nodes.len()];
        for e in &topology.edges {
            if e.faces.len() < 2 {
                continue;
            }
            for x in 0..e.faces.len() {
                for y in x + 1..e.faces.len() {
                    let (f, g) = (e.faces[x] as usize, e.faces[y] as usize);
                    let (a, b) = (region[f] as usize, region[g] as usize);
                    if a != b && nodes[a].0.interval.abs_diff(nodes[b].0.interval) == 1 {
                        neighbor_sets[rank[a] as usize].push(rank[b]);
                        neighbor_sets[rank[b] as usize].push(rank[a]);
                    }
                }
            }
        }

        let mut level: Vec<MrgNode> = order.iter().map(|&old| nodes[old].0.clone()).collect();
        for (node, mut nb) in level.iter_mut().zip(neighbor_sets) {
            nb.sort_unstable();
            nb.dedup();
            node.neighbors = nb;
        }
        prev_node_of_face = region.iter().map(|&reg| rank[reg as usize]).collect();
        levels.push(level);
    }

    Ok(Mrg {
        resolution,
        total_area,
        face_count: nf as u32,
        levels,
    })
}
