use super::TriangleMesh;

/// An undirected edge `(a, b)` with `a < b` and the faces incident to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRecord {
    pub a: u32,
    pub b: u32,
    pub faces: Vec<u32>,
}

/// Edge-based face adjacency.
///
/// Two faces are adjacent when they share an edge. Edges with more than two
/// incident faces are recorded in `non_manifold_edges` and connect every pair
/// of their faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    /// Sorted neighbor lists, one per face.
    pub face_adjacency: Vec<Vec<u32>>,
    /// All edges sorted by `(a, b)`.
    pub edges: Vec<EdgeRecord>,
    pub boundary_edges: Vec<(u32, u32)>,
    pub non_manifold_edges: Vec<(u32, u32)>,
}

impl MeshTopology {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let mut half: Vec<(u32, u32, u32)> = Vec::with_capacity(mesh.face_count() * 3);
        for (fi, f) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (f[k], f[(k + 1) % 3]);
                half.push((u.min(v), u.max(v), fi as u32));
            }
        }
        half.sort_unstable();

        let mut edges: Vec<EdgeRecord> = Vec::new();
        for (a, b, f) in half {
            match edges.last_mut() {
                Some(e) if e.a == a && e.b == b => {
                    if e.faces.last() != Some(&f) {
                        e.faces.push(f);
                    }
                }
                _ => edges.push(EdgeRecord {
                    a,
                    b,
                    faces: vec![f],
                }),
            }
        }

        let mut face_adjacency = vec![Vec::new(); mesh.face_count()];
        let mut boundary_edges = Vec::new();
        let mut non_manifold_edges = Vec::new();
        for e in &edges {
            match e.faces.len() {
                1 => boundary_edges.push((e.a, e.b)),
                2 => {}
                _ => non_manifold_edges.push((e.a, e.b)),
            }
            for (i, &f) in e.faces.iter().enumerate() {
                for &g in &e.faces[i + 1..] {
                    face_adjacency[f as usize].push(g);
                    face_adjacency[g as usize].push(f);
                }
            }
        }
        for adj in &mut face_adjacency {
            adj.sort_unstable();
            adj.dedup();
        }

        Self {
            face_adjacency,
            edges,
            boundary_edges,
            non_manifold_edges,
        }
    }

    pub fn is_manifold(&self) -> bool {
        self.non_manifold_edges.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edges.is_empty()
    }

    /// Faces incident to the undirected edge `(u, v)`.
    pub fn edge_faces(&self, u: u32, v: u32) -> &[u32] {
        let key = (u.min(v), u.max(v));
        match self.edges.binary_search_by(|e| (e.a, e.b).cmp(&key)) {
            Ok(i) => &self.edges[i].faces,
            Err(_) => &[],
        }
    }

    /// First edge shared by faces `f` and `g`, as vertex indices.
    pub fn shared_edge(mesh: &TriangleMesh, f: usize, g: usize) -> Option<(u32, u32)> {
        let a = mesh.faces()[f];
        let b = mesh.faces()[g];
        for k in 0..3 {
            let (u, v) = (a[k], a[(k + 1) % 3]);
            if b.contains(&u) && b.contains(&v) {
                return Some((u, v));
            }
        }
        None
    }

    /// Vertex-to-vertex neighbor lists derived from the edge table, sorted.
    pub fn vertex_neighbors(&self, vertex_count: usize) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); vertex_count];
        for e in &self.edges {
            adj[e.a as usize].push(e.b);
            adj[e.b as usize].push(e.a);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Per-vertex flag: lies on a boundary or non-manifold edge.
    pub fn constrained_vertices(&self, vertex_count: usize) -> Vec<bool> {
        let mut flags = vec![false; vertex_count];
        for &(a, b) in self.boundary_edges.iter().chain(&self.non_manifold_edges) {
            flags[a as usize] = true;
            flags[b as usize] = true;
        }
        flags
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Vec3;
    use crate::primitives;

    #[test]
    fn single_triangle() {
        let m = TriangleMesh::new("t", vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let t = MeshTopology::build(&m);
        assert!(t.face_adjacency[0].is_empty());
        assert_eq!(t.boundary_edges.len(), 3);
    }

    #[test]
    fn two_triangles_share_edge() {
        let m = TriangleMesh::new(
            "t",
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let t = MeshTopology::build(&m);
        assert_eq!(t.face_adjacency, vec![vec![1], vec![0]]);
        assert_eq!(t.boundary_edges.len(), 4);
        assert_eq!(t.edge_faces(2, 1), &[0, 1]);
    }

    #[test]
    fn closed_cube() {
        // 8 corners, 12 triangles: 6 diagonal edges + 12 cube edges = 18 edges,
        // each shared by exactly 2 faces.
        let t = MeshTopology::build(&primitives::unit_cube());
        assert_eq!(t.edges.len(), 18);
        assert!(t.edges.iter().all(|e| e.faces.len() == 2));
        assert!(t.face_adjacency.iter().all(|a| a.len() == 3));
        assert!(t.is_closed() && t.is_manifold());
    }

    #[test]
    fn non_manifold_fin_is_flagged() {
        let m = TriangleMesh::new(
            "fin",
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z()],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        let t = MeshTopology::build(&m);
        assert_eq!(t.non_manifold_edges, vec![(0, 1)]);
        assert_eq!(t.face_adjacency[0], vec![1, 2]);
    }
}
