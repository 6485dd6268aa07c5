//! Request and response bodies. Every response the service produces
//! deserializes into one of these.

use std::collections::BTreeMap;

use fabseg_core::classify::{ClassificationReport, ClassifyParams, ComponentLabels, Linkage, LinkageMode};
use fabseg_core::labels::FunctionalityLabel;
use fabseg_core::spectral::SegmentationResult;
use fabseg_core::stylize::{StyleProvenance, StyleSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub meshes: usize,
    pub things: usize,
    pub corpus_entries: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub mesh_id: String,
    pub name: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub has_colors: bool,
    pub sha256: String,
    #[serde(default)]
    pub derived_from: Option<String>,
    #[serde(default)]
    pub processed: Option<ProcessInfo>,
    #[serde(default)]
    pub segmentation_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessRequest {
    pub target_resolution: Option<usize>,
    pub tolerance_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessInfo {
    pub mesh_id: String,
    pub target_resolution: usize,
    pub original_face_count: usize,
    pub face_count: usize,
    pub vertex_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub mesh_id: String,
    /// Identical for identical (mesh, k, seed, parameters).
    pub segmentation_id: String,
    #[serde(flatten)]
    pub segmentation: SegmentationResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateThing {
    pub mesh_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThingCreated {
    pub thing_id: String,
    pub mesh_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub alpha: Option<f64>,
    pub n_meshes: Option<usize>,
    pub n_segments: Option<usize>,
    pub linkage: Option<LinkageMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchLabel {
    pub label: FunctionalityLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOverride {
    pub mesh_id: String,
    pub segment: usize,
    pub label: FunctionalityLabel,
}

/// Classifier output plus the review edits made since.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationView {
    pub params: ClassifyParams,
    /// Segmentation each mesh was classified under.
    pub segmentation_ids: BTreeMap<String, String>,
    pub reports: Vec<ClassificationReport>,
    /// Linkages still in force.
    pub linkages: Vec<Linkage>,
    /// Linkages removed by the reviewer.
    pub separated: Vec<Linkage>,
    /// Labels as the classifier produced them, before any review edit.
    pub classifier_labels: Vec<ComponentLabels>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThingView {
    pub thing_id: String,
    pub mesh_ids: Vec<String>,
    pub segmentation_ids: BTreeMap<String, Option<String>>,
    pub classification: Option<ClassificationView>,
    pub overrides: Vec<LabelOverride>,
    /// Labels after separated linkages and overrides; empty before the
    /// first classification.
    pub effective_labels: Vec<ComponentLabels>,
    /// A mesh was re-segmented after classification.
    pub stale: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StyleRequest {
    #[serde(flatten)]
    pub spec: StyleSpec,
    /// Needed only when the mesh belongs to several classified things.
    #[serde(default)]
    pub thing_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stylized {
    pub mesh_id: String,
    pub source_mesh_id: String,
    pub thing_id: String,
    pub labels: Vec<FunctionalityLabel>,
    pub masked_vertices: usize,
    pub provenance: StyleProvenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub status: JobStatus,
    pub poll: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub job_id: String,
    pub kind: String,
    pub status: JobStatus,
    #[serde(default)]
    pub result: Option<serde_json::Value>,
    #[serde(default)]
    pub error: Option<ErrorBody>,
    /// Status the operation would have answered with synchronously.
    #[serde(default)]
    pub http_status: Option<u16>,
}
