use serde::{Deserialize, Serialize};
use tracing::warn;

use super::eigen::{eigendecompose_with, Spectrum};
use super::graph::DualGraph;
use super::kmeans::kmeans;
use super::{SegmentParams, SpectralError};
use crate::mesh::{MeshTopology, TriangleMesh};

/// Partition of a mesh's faces into `k` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub k: usize,
    pub predicted_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_k: Option<usize>,
    pub seed: u64,
    pub face_labels: Vec<u32>,
    #[serde(default)]
    pub params: SegmentParams,
    /// The eigenvalue window the prediction was made from.
    #[serde(default)]
    pub eigenvalues: Vec<f64>,
}

impl SegmentationResult {
    /// Wrap an externally supplied labeling (annotations, construction tags).
    /// Labels are compacted to `0..k` in order of first appearance.
    pub fn from_labels(labels: &[u32], seed: u64) -> Self {
        let face_labels = compact_labels(labels);
        let k = face_labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Self {
            k,
            predicted_k: k,
            requested_k: Some(k),
            seed,
            face_labels,
            params: SegmentParams::with_seed(seed),
            eigenvalues: Vec::new(),
        }
    }

    /// Face lists per segment, ascending.
    pub fn segments(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (f, &l) in self.face_labels.iter().enumerate() {
            out[l as usize].push(f);
        }
        out
    }

    /// Check that labels cover exactly `0..k` and that there is one per face.
    pub fn validate(&self, face_count: usize) -> Result<(), String> {
        if self.face_labels.len() != face_count {
            return Err(format!(
                "segmentation has {} labels for {} faces",
                self.face_labels.len(),
                face_count
            ));
        }
        let mut used = vec![false; self.k];
        for &l in &self.face_labels {
            match used.get_mut(l as usize) {
                Some(u) => *u = true,
                None => return Err(format!("segment id {l} out of range for k = {}", self.k)),
            }
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(format!("segment {empty} has no faces"));
        }
        Ok(())
    }
}

pub(crate) fn compact_labels(labels: &[u32]) -> Vec<u32> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len() as u32;
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Number of eigenvalues strictly above `μ + σ`, clamped to `[k_min, k_max]`.
pub fn predict_k(spectrum: &Spectrum, k_min: usize, k_max: usize) -> usize {
    let threshold = spectrum.mean + spectrum.std_dev;
    let raw = spectrum.eigenvalues.iter().filter(|&&l| l > threshold).count();
    raw.clamp(k_min, k_max.max(k_min))
}

/// Spectral segmentation. With `requested_k = None` the count comes from
/// [`predict_k`] over the `params.m` smallest eigenvalues.
///
/// A mesh with several face-connected components is segmented on its
/// largest component; faces elsewhere take the label of the nearest
/// labeled face centroid.
pub fn segment(
    mesh: &TriangleMesh,
    requested_k: Option<usize>,
    params: &SegmentParams,
) -> Result<SegmentationResult, SpectralError> {
    params.validate()?;
    let n_total = mesh.face_count();
    if let Some(k) = requested_k {
        if k == 0 || k > n_total {
            return Err(SpectralError::TooFewFaces { faces: n_total, k });
        }
    }

    let topology = MeshTopology::build(mesh);
    let (component, component_count) = crate::mesh::face_components(&topology);
    let mut main_faces: Vec<usize> = (0..n_total).collect();
    let mut sub = None;
    if component_count > 1 {
        let mut sizes = vec![0usize; component_count];
        for &c in &component {
            sizes[c as usize] += 1;
        }
        let largest = (0..component_count).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
        warn!(
            components = component_count,
            kept = sizes[largest],
            "mesh is disconnected; segmenting the largest component"
        );
        main_faces.retain(|&f| component[f] as usize == largest);
        let part = mesh.submesh(&main_faces)?;
        let topo = MeshTopology::build(&part);
        sub = Some((part, topo));
    }
    let (work_mesh, work_topo) = match &sub {
        Some((m, t)) => (m, t),
        None => (mesh, &topology),
    };

    let n = work_mesh.face_count();
    let k_max = params.effective_k_max().min(n);
    if let Some(k) = requested_k {
        if k > n {
            return Err(SpectralError::TooFewFaces { faces: n, k });
        }
    }

    let (labels, predicted_k, eigenvalues) = if n == 1 {
        (vec![0u32], 1, vec![0.0])
    } else {
        let graph = DualGraph::build(work_mesh, work_topo, params.delta, params.eta_convex)?;
        let laplacian = graph.normalized_laplacian()?;
        let window = params.m.min(n);
        let spectrum = eigendecompose_with(&laplacian, window, params.seed, params.solver)?;
        let predicted = predict_k(&spectrum, params.k_min.min(n), k_max);
        let k = requested_k.unwrap_or(predicted);
        let vectors = if k > window {
            eigendecompose_with(&laplacian, k, params.seed, params.solver)?.eigenvectors
        } else {
            spectrum.eigenvectors.clone()
        };
        let labels = if k == 1 {
            vec![0u32; n]
        } else {
            let embedding = row_normalized_embedding(&vectors, k);
            kmeans(&embedding, k, k, params.seed).labels
        };
        (labels, predicted, spectrum.eigenvalues)
    };

    let mut face_labels = vec![u32::MAX; n_total];
    for (local, &f) in main_faces.iter().enumerate() {
        face_labels[f] = labels[local];
    }
    if main_faces.len() < n_total {
        assign_nearest(mesh, &mut face_labels);
    }
    let face_labels = compact_labels(&face_labels);
    let k = face_labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    Ok(SegmentationResult {
        k,
        predicted_k,
        requested_k,
        seed: params.seed,
        face_labels,
        params: *params,
        eigenvalues,
    })
}

fn row_normalized_embedding(vectors: &nalgebra::DMatrix<f64>, k: usize) -> Vec<f64> {
    let n = vectors.nrows();
    let mut out = Vec::with_capacity(n * k);
    for r in 0..n {
        let row: Vec<f64> = (0..k).map(|c| vectors[(r, c)]).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.extend(row.iter().map(|x| x / norm));
        } else {
            out.extend(row);
        }
    }
    out
}

/// Give every unlabeled face the label of the closest labeled face centroid.
fn assign_nearest(mesh: &TriangleMesh, labels: &mut [u32]) {
    let centroids: Vec<_> = (0..mesh.face_count()).map(|f| mesh.face_centroid(f)).collect();
    let labeled: Vec<usize> = (0..labels.len()).filter(|&f| labels[f] != u32::MAX).collect();
    for f in 0..labels.len() {
        if labels[f] != u32::MAX {
            continue;
        }
        let mut best = (f64::INFINITY, 0usize);
        for &g in &labeled {
            let d = (centroids[f] - centroids[g]).norm_squared();
            if d < best.0 {
                best = (d, g);
            }
        }
        labels[f] = labels[best.1];
    }
}
