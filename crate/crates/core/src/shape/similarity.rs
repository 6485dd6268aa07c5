use serde::{Deserialize, Serialize};

use super::mrg::{Mrg, MrgNode};
use super::ShapeError;
use crate::mesh::{MeshTopology, TriangleMesh};
use crate::spectral::SegmentationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    /// Matched finest-level node indices `(left, right)`.
    pub matched_pairs: Vec<(u32, u32)>,
}

fn pair_sim(m: &MrgNode, n: &MrgNode, w: f64) -> f64 {
    w * m.area.min(n.area) + (1.0 - w) * m.length.min(n.length)
}

/// Coarse-to-fine greedy matching of two MRGs.
///
/// At each level only nodes in the same interval whose parents were matched
/// to each other may pair up. Pairs are taken in descending similarity;
/// ties prefer nodes with closer canonical rank. The score sums the matched
/// finest-level similarities.
pub fn mrg_similarity(g1: &Mrg, g2: &Mrg, w: f64) -> Result<SimilarityScore, ShapeError> {
    if g1.resolution != g2.resolution {
        return Err(ShapeError::ResolutionMismatch {
            left: g1.resolution,
            right: g2.resolution,
        });
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(ShapeError::InvalidParams(format!("weight {w} not in [0, 1]")));
    }
    let mut prev: Vec<Option<u32>> = Vec::new();
    let mut total = 0.0;
    let mut pairs = Vec::new();
    for (r, (l1, l2)) in g1.levels.iter().zip(&g2.levels).enumerate() {
        let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
        // Nodes are sorted by interval, so walk both lists in step.
        let mut j0 = 0;
        for (i, m) in l1.iter().enumerate() {
            while j0 < l2.len() && l2[j0].interval < m.interval {
                j0 += 1;
            }
            for (j, n) in l2.iter().enumerate().skip(j0) {
                if n.interval != m.interval {
                    break;
                }
                if r > 0 {
                    let (pm, pn) = (m.parent.unwrap_or(u32::MAX), n.parent.unwrap_or(u32::MAX));
                    if prev.get(pm as usize).copied().flatten() != Some(pn) {
                        continue;
                    }
                }
                candidates.push((pair_sim(m, n, w), i as u32, j as u32));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.abs_diff(a.2).cmp(&b.1.abs_diff(b.2)))
                .then(a.1.min(a.2).cmp(&b.1.min(b.2)))
                .then(a.1.max(a.2).cmp(&b.1.max(b.2)))
        });
        let mut left = vec![None; l1.len()];
        let mut used_right = vec![false; l2.len()];
        let last = r + 1 == g1.levels.len();
        for (s, i, j) in candidates {
            if left[i as usize].is_some() || used_right[j as usize] {
                continue;
            }
            left[i as usize] = Some(j);
            used_right[j as usize] = true;
            if last {
                total += s;
                pairs.push((i, j));
            }
        }
        prev = left;
    }
    pairs.sort_unstable();
    Ok(SimilarityScore {
        value: total.clamp(0.0, 1.0),
        matched_pairs: pairs,
    })
}

/// Segment similarity in the context of the parent meshes:
/// `sim(mesh_i, mesh_j) · sim(seg_i, seg_j)`.
pub fn contextual_similarity(mesh_similarity: f64, segment_similarity: f64) -> f64 {
    mesh_similarity * segment_similarity
}

/// [`contextual_similarity`] computed from the four graphs.
pub fn contextual_similarity_of(
    seg_i: &Mrg,
    mesh_i: &Mrg,
    seg_j: &Mrg,
    mesh_j: &Mrg,
    w: f64,
) -> Result<f64, ShapeError> {
    let m = mrg_similarity(mesh_i, mesh_j, w)?.value;
    let s = mrg_similarity(seg_i, seg_j, w)?.value;
    Ok(contextual_similarity(m, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMesh {
    pub mesh: TriangleMesh,
    /// The segment's faces were not edge-connected; only the largest piece
    /// is in `mesh`.
    pub disconnected: bool,
    /// Faces of the original mesh that ended up in `mesh`, in its order.
    pub faces: Vec<usize>,
}

/// The faces of one segment as a standalone mesh.
pub fn segment_submesh(
    mesh: &TriangleMesh,
    segmentation: &SegmentationResult,
    segment_id: usize,
) -> Result<SegmentMesh, ShapeError> {
    if segment_id >= segmentation.k {
        return Err(ShapeError::SegmentOutOfRange {
            id: segment_id,
            k: segmentation.k,
        });
    }
    if segmentation.face_labels.len() != mesh.face_count() {
        return Err(ShapeError::InvalidParams(format!(
            "segmentation has {} labels for {} faces",
            segmentation.face_labels.len(),
            mesh.face_count()
        )));
    }
    let faces: Vec<usize> = (0..mesh.face_count())
        .filter(|&f| segmentation.face_labels[f] as usize == segment_id)
        .collect();
    if faces.is_empty() {
        return Err(ShapeError::EmptySegment(segment_id));
    }
    let topology = MeshTopology::build(mesh);
    let pieces = crate::mesh::components_within(&topology, &faces);
    let disconnected = pieces.len() > 1;
    let mut keep = pieces.into_iter().next().unwrap();
    keep.sort_unstable();
    let name = format!("{}#seg{}", mesh.name(), segment_id);
    let sub = mesh.submesh(&keep)?.with_name(name);
    Ok(SegmentMesh {
        mesh: sub,
        disconnected,
        faces: keep,
    })
}
