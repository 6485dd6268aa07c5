//! Functionality-aware segmentation, classification and selective styling
//! of 3D-printable triangle meshes.
//!
//! The pipeline: [`mesh`] ingestion and remeshing, [`spectral`]
//! segmentation, [`shape`] similarity via multiresolution Reeb graphs, a
//! labeled [`corpus`], functionality [`classify`]ication, and [`stylize`]
//! which perturbs only the aesthetic vertices.

pub mod mesh;
pub mod primitives;
pub mod spectral;
pub mod shape;
pub mod labels;
pub mod corpus;
pub mod classify;
pub mod stylize;
