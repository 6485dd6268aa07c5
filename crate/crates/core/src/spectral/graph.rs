use crate::mesh::{MeshTopology, TriangleMesh};

use super::{SparseMatrix, SpectralError};

/// One adjacency of the face-dual graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEdge {
    pub i: u32,
    pub j: u32,
    /// Centroid → shared-edge midpoint → centroid (mm).
    pub geodesic: f64,
    /// `η·(1 − cos θ)` with θ the angle between face normals.
    pub angular: f64,
    pub affinity: f64,
}

/// Weighted face-dual graph: nodes are faces, edges join faces sharing a
/// mesh edge, weights are `exp(−Dist)`.
#[derive(Debug, Clone)]
pub struct DualGraph {
    pub node_count: usize,
    pub edges: Vec<DualEdge>,
    pub affinity: SparseMatrix,
    pub degree: Vec<f64>,
}

impl DualGraph {
    /// Build the dual graph with the combined distance
    /// `delta·Geod/avg(Geod) + (1−delta)·Ang/avg(Ang)`.
    ///
    /// Convex folds are discounted by `eta_convex`; concave folds use η = 1.
    /// When every fold is flat the angular term vanishes.
    pub fn build(
        mesh: &TriangleMesh,
        topology: &MeshTopology,
        delta: f64,
        eta_convex: f64,
    ) -> Result<Self, SpectralError> {
        let n = mesh.face_count();
        let centroids: Vec<_> = (0..n).map(|f| mesh.face_centroid(f)).collect();
        let normals: Vec<_> = (0..n).map(|f| mesh.face_normal(f)).collect();
        let verts = mesh.vertices();

        let mut edges = Vec::new();
        for (i, adj) in topology.face_adjacency.iter().enumerate() {
            for &j in adj {
                let j = j as usize;
                if j <= i {
                    continue;
                }
                let (u, v) = MeshTopology::shared_edge(mesh, i, j).expect("adjacent faces share an edge");
                let mid = (verts[u as usize] + verts[v as usize]) * 0.5;
                let geodesic = (centroids[i] - mid).norm() + (mid - centroids[j]).norm();
                let cos = normals[i].dot(&normals[j]).clamp(-1.0, 1.0);
                // Convex when the neighbor's centroid lies behind this face's plane.
                let convex = (centroids[j] - centroids[i]).dot(&normals[i]) < 0.0;
                let eta = if convex { eta_convex } else { 1.0 };
                edges.push(DualEdge {
                    i: i as u32,
                    j: j as u32,
                    geodesic,
                    angular: eta * (1.0 - cos),
                    affinity: 0.0,
                });
            }
        }

        if !edges.is_empty() {
            let count = edges.len() as f64;
            let avg_geod = edges.iter().map(|e| e.geodesic).sum::<f64>() / count;
            let avg_ang = edges.iter().map(|e| e.angular).sum::<f64>() / count;
            if !(avg_geod > 0.0) {
                return Err(SpectralError::ZeroDistance);
            }
            for e in &mut edges {
                let ang = if avg_ang > 0.0 { e.angular / avg_ang } else { 0.0 };
                let dist = delta * e.geodesic / avg_geod + (1.0 - delta) * ang;
                e.affinity = (-dist).exp();
            }
        }

        let mut triplets = Vec::with_capacity(edges.len() * 2);
        let mut degree = vec![0.0; n];
        for e in &edges {
            triplets.push((e.i, e.j, e.affinity));
            triplets.push((e.j, e.i, e.affinity));
        }
        let affinity = SparseMatrix::from_triplets(n, triplets);
        for (i, d) in degree.iter_mut().enumerate() {
            *d = affinity.row(i).map(|(_, w)| w).sum();
        }
        Ok(Self {
            node_count: n,
            edges,
            affinity,
            degree,
        })
    }

    /// `L = I − D^(−1/2) W D^(−1/2)`.
    pub fn normalized_laplacian(&self) -> Result<SparseMatrix, SpectralError> {
        normalized_laplacian(&self.affinity, &self.degree)
    }
}

pub fn normalized_laplacian(w: &SparseMatrix, degree: &[f64]) -> Result<SparseMatrix, SpectralError> {
    let n = w.dim();
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0)) {
        return Err(SpectralError::IsolatedNode(i));
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut t = Vec::with_capacity(w.nnz() + n);
    for i in 0..n {
        t.push((i as u32, i as u32, 1.0));
        for (j, v) in w.row(i) {
            if j != i {
                t.push((i as u32, j as u32, -v * inv_sqrt[i] * inv_sqrt[j]));
            } else {
                t.push((i as u32, i as u32, -v * inv_sqrt[i] * inv_sqrt[i]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;

    fn graph(mesh: &TriangleMesh, delta: f64, eta: f64) -> DualGraph {
        DualGraph::build(mesh, &MeshTopology::build(mesh), delta, eta).unwrap()
    }

    #[test]
    fn coplanar_pair_has_no_angular_term() {
        let m = TriangleMesh::new(
            "pair",
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let g = graph(&m, 0.5, 0.1);
        assert_eq!(g.edges.len(), 1);
        let e = g.edges[0];
        assert_eq!(e.angular, 0.0);
        // Single edge: Geod/avg(Geod) = 1, so Dist = delta.
        assert!((e.affinity - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn right_angle_concave_fold() {
        // Floor and wall meeting at x = 0 with normals facing each other.
        let m = TriangleMesh::new(
            "fold",
            vec![Vec3::zeros(), Vec3::y(), Vec3::x(), Vec3::z()],
            vec![[0, 2, 1], [0, 1, 3]],
        )
        .unwrap();
        assert_eq!(m.face_normal(0), Vec3::z());
        assert_eq!(m.face_normal(1), Vec3::x());
        let g = graph(&m, 0.5, 0.1);
        assert!((g.edges[0].angular - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_fan_has_equal_weights() {
        // Four triangles around the origin.
        let m = TriangleMesh::new(
            "fan",
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), -Vec3::x(), -Vec3::y()],
            vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]],
        )
        .unwrap();
        let g = graph(&m, 0.5, 0.1);
        assert_eq!(g.edges.len(), 4);
        // Every shared edge is a spoke of length 1 with midpoint at distance
        // 1/2; centroids sit at (1/3, 1/3, 0) etc., so all four geodesics are
        // equal and each weight is exp(-0.5).
        for e in &g.edges {
            assert!((e.affinity - (-0.5f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_node_laplacian() {
        for w in [0.01, 0.5, 1.0] {
            let a = SparseMatrix::from_triplets(2, vec![(0, 1, w), (1, 0, w)]);
            let l = normalized_laplacian(&a, &[w, w]).unwrap();
            let expected = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
            assert!((l.to_dense() - expected).amax() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_is_named() {
        let a = SparseMatrix::from_triplets(3, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(
            normalized_laplacian(&a, &[1.0, 1.0, 0.0]).unwrap_err(),
            SpectralError::IsolatedNode(2)
        );
    }
}
