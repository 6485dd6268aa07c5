use super::{MeshTopology, TriangleMesh};

/// Face-connected component id per face, numbered in order of each
/// component's lowest face index. Returns `(labels, component_count)`.
pub(crate) fn face_components(topology: &MeshTopology) -> (Vec<u32>, usize) {
    let n = topology.face_adjacency.len();
    let mut label = vec![u32::MAX; n];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != u32::MAX {
            continue;
        }
        label[start] = count;
        stack.push(start);
        while let Some(f) = stack.pop() {
            for &g in &topology.face_adjacency[f] {
                if label[g as usize] == u32::MAX {
                    label[g as usize] = count;
                    stack.push(g as usize);
                }
            }
        }
        count += 1;
    }
    (label, count as usize)
}

/// Face lists of each face-connected component within a subset of faces.
/// Components are ordered by size (largest first), then by lowest face.
pub(crate) fn components_within(topology: &MeshTopology, faces: &[usize]) -> Vec<Vec<usize>> {
    let n = topology.face_adjacency.len();
    let mut member = vec![false; n];
    for &f in faces {
        member[f] = true;
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &start in faces {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(f) = stack.pop() {
            comp.push(f);
            for &g in &topology.face_adjacency[f] {
                let g = g as usize;
                if member[g] && !seen[g] {
                    seen[g] = true;
                    stack.push(g);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Split a mesh into face-connected components, each a standalone mesh.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<TriangleMesh> {
    let topo = MeshTopology::build(mesh);
    let (labels, count) = face_components(&topo);
    let mut groups = vec![Vec::new(); count];
    for (f, &l) in labels.iter().enumerate() {
        groups[l as usize].push(f);
    }
    groups
        .iter()
        .enumerate()
        .map(|(i, faces)| {
            let sub = mesh
                .submesh(faces)
                .expect("faces of a valid mesh form a valid submesh");
            if count > 1 {
                sub.with_name(format!("{}#{}", mesh.name(), i))
            } else {
                sub
            }
        })
        .collect()
}
