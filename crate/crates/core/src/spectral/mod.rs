//! Spectral segmentation over the face-dual graph.

mod cholesky;
mod eigen;
mod graph;
mod kmeans;
mod segment;
mod sparse;
mod sweep;

pub use cholesky::{EnvelopeCholesky, NotPositiveDefinite};
pub use eigen::{eigendecompose, eigendecompose_with, EigenMethod, Spectrum, DENSE_LIMIT, RESIDUAL_TOL};
pub use graph::{normalized_laplacian, DualEdge, DualGraph};
pub use kmeans::{kmeans, KMeansResult};
pub use segment::{predict_k, segment, SegmentationResult};
pub use sparse::SparseMatrix;
pub use sweep::{stability_sweep, stabilization_resolution, stable_run_length, SweepPoint, SWEEP_RESOLUTIONS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::MeshError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("all dual-graph distances are zero")]
    ZeroDistance,
    #[error("face {0} has no neighbors in the dual graph")]
    IsolatedNode(usize),
    #[error("eigen window m = {m} outside 1..={n}")]
    InvalidWindow { m: usize, n: usize },
    #[error("shifted laplacian is not positive definite at row {row} (pivot {pivot})")]
    Factorization { row: usize, pivot: f64 },
    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("cannot split {faces} faces into {k} segments")]
    TooFewFaces { faces: usize, k: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Knobs for [`segment`]. Defaults follow the documented pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    /// Weight of the geodesic term against the angular term.
    pub delta: f64,
    /// Angular discount applied to convex folds.
    pub eta_convex: f64,
    /// Number of smallest eigenvalues in the k-prediction window.
    pub m: usize,
    pub seed: u64,
    pub k_min: usize,
    /// Upper clamp; `None` means `min(m − 1, 25)`.
    pub k_max: Option<usize>,
    pub solver: EigenMethod,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            eta_convex: 0.1,
            m: 64,
            seed: 0,
            k_min: 1,
            k_max: None,
            solver: EigenMethod::Auto,
        }
    }
}

impl SegmentParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn effective_k_max(&self) -> usize {
        self.k_max.unwrap_or_else(|| self.m.saturating_sub(1).min(25)).max(self.k_min)
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(SpectralError::InvalidParams(format!("delta {} not in [0, 1]", self.delta)));
        }
        if !(self.eta_convex > 0.0 && self.eta_convex <= 1.0) {
            return Err(SpectralError::InvalidParams(format!(
                "eta_convex {} not in (0, 1]",
                self.eta_convex
            )));
        }
        if self.m == 0 {
            return Err(SpectralError::InvalidParams("m must be at least 1".into()));
        }
        if self.k_min == 0 {
            return Err(SpectralError::InvalidParams("k_min must be at least 1".into()));
        }
        if let Some(k_max) = self.k_max {
            if k_max < self.k_min {
                return Err(SpectralError::InvalidParams(format!(
                    "k_max {k_max} below k_min {}",
                    self.k_min
                )));
            }
        }
        Ok(())
    }
}
