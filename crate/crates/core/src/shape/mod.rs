//! Topological shape similarity with multiresolution Reeb graphs.

mod mrg;
mod mu;
pub mod sidecar;
mod similarity;

pub use mrg::{build_mrg, describe, mu_by_component, Mrg, MrgNode};
pub use mu::{compute_mu, MuField, DEFAULT_BASE_POINTS};
pub use similarity::{
    contextual_similarity, contextual_similarity_of, mrg_similarity, segment_submesh, SegmentMesh, SimilarityScore,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::MeshError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mesh is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("MRG resolutions differ ({left} vs {right})")]
    ResolutionMismatch { left: u32, right: u32 },
    #[error("segment {0} has no faces")]
    EmptySegment(usize),
    #[error("segment {id} out of range for k = {k}")]
    SegmentOutOfRange { id: usize, k: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// MRG construction and comparison settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    pub base_points: usize,
    /// Finest level has `2^resolution` intervals.
    pub resolution: u32,
    /// Area weight in node similarity; `1 − weight` goes to μ-extent.
    pub weight: f64,
    pub seed: u64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            base_points: DEFAULT_BASE_POINTS,
            resolution: 4,
            weight: 0.5,
            seed: 0,
        }
    }
}

impl ShapeParams {
    pub fn validate(&self) -> Result<(), ShapeError> {
        if self.base_points == 0 {
            return Err(ShapeError::InvalidParams("base_points must be at least 1".into()));
        }
        if !(1..=16).contains(&self.resolution) {
            return Err(ShapeError::InvalidParams(format!("resolution {} not in 1..=16", self.resolution)));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(ShapeError::InvalidParams(format!("weight {} not in [0, 1]", self.weight)));
        }
        Ok(())
    }
}
