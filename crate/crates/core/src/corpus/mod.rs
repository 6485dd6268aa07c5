//! Labeled corpus: manifest ingestion, the MRG index and the evaluation
//! harness.

mod evaluate;
mod index;
pub mod synthetic;

pub use evaluate::{evaluate, EvaluationReport, TaskMetrics};
pub use index::{
    build_index, load_index, query_similar, query_similar_meshes, BuildStats, CorpusIndex, IndexedEntry, MeshMatch,
    INDEX_VERSION,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use crate::labels::{Category, Composition, FunctionalityLabel};
use crate::mesh::{parse_mesh, remesh, MeshFormat, RemeshParams, TriangleMesh};
use crate::shape::ShapeError;
use crate::spectral::{segment, SegmentParams, SegmentationResult};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error("index at {path}: {message}")]
    Index { path: PathBuf, message: String },
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Classify(#[from] crate::classify::ClassifyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Segmentation block of a manifest entry. Either explicit per-face labels,
/// or only a segment count (or nothing) to have the mesh remeshed and
/// segmented at ingest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestSegmentation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub thing_id: String,
    /// Mesh file, relative to the manifest's directory.
    pub mesh: PathBuf,
    pub category: Category,
    pub composition: Composition,
    /// Entries sharing a group are components of one multi-part design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default)]
    pub segmentation: ManifestSegmentation,
    pub labels: Vec<String>,
}

/// One ingested, validated corpus model.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub thing_id: String,
    pub group: String,
    pub mesh_path: PathBuf,
    pub category: Category,
    pub composition: Composition,
    /// The mesh the segmentation refers to (remeshed when the manifest gave
    /// no face labels).
    pub mesh: TriangleMesh,
    pub segmentation: SegmentationResult,
    pub segment_labels: Vec<FunctionalityLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    InvalidEntry,
    InvalidThingId,
    DuplicateThingId,
    MissingFile,
    InvalidMesh,
    UnknownLabel,
    FaceLabelMismatch,
    SegmentationFailed,
    LabelCountMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub index: usize,
    pub thing_id: Option<String>,
    pub reason: RejectReason,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub entries: Vec<CorpusEntry>,
    pub rejected: Vec<RejectedEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Resolution for entries segmented at ingest.
    pub remesh: RemeshParams,
    pub segment: SegmentParams,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            remesh: RemeshParams::default(),
            segment: SegmentParams::default(),
        }
    }
}

pub(crate) fn valid_thing_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Load and validate every manifest entry. Each entry is accepted or
/// rejected as a whole; one bad entry does not stop the others.
pub fn ingest(manifest: &Path, options: &IngestOptions) -> Result<IngestOutcome, CorpusError> {
    let text = std::fs::read_to_string(manifest).map_err(io_err(manifest))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CorpusError::Manifest {
        path: manifest.to_path_buf(),
        message: e.to_string(),
    })?;
    let items = value.as_array().ok_or_else(|| CorpusError::Manifest {
        path: manifest.to_path_buf(),
        message: "expected a JSON array of entries".into(),
    })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut outcome = IngestOutcome {
        entries: Vec::new(),
        rejected: Vec::new(),
        warnings: Vec::new(),
    };
    if items.is_empty() {
        let msg = format!("manifest {} has no entries; classification will fail", manifest.display());
        warn!("{msg}");
        outcome.warnings.push(msg);
    }
    let mut seen = std::collections::HashSet::new();
    for (index, item) in items.iter().enumerate() {
        let thing_id = item.get("thing_id").and_then(|v| v.as_str()).map(str::to_string);
        let reject = |reason, message: String| RejectedEntry {
            index,
            thing_id: thing_id.clone(),
            reason,
            message,
        };
        let entry: ManifestEntry = match serde_json::from_value(item.clone()) {
            Ok(e) => e,
            Err(e) => {
                outcome.rejected.push(reject(RejectReason::InvalidEntry, e.to_string()));
                continue;
            }
        };
        if !valid_thing_id(&entry.thing_id) {
            outcome.rejected.push(reject(
                RejectReason::InvalidThingId,
                format!("thing_id {:?} must be 1-128 chars of [A-Za-z0-9._-]", entry.thing_id),
            ));
            continue;
        }
        if !seen.insert(entry.thing_id.clone()) {
            outcome.rejected.push(reject(
                RejectReason::DuplicateThingId,
                format!("thing_id {:?} appears twice", entry.thing_id),
            ));
            continue;
        }
        match ingest_entry(&entry, base, options) {
            Ok(e) => outcome.entries.push(e),
            Err((reason, message)) => outcome.rejected.push(reject(reason, message)),
        }
    }
    for r in &outcome.rejected {
        warn!(index = r.index, reason = ?r.reason, "{}", r.message);
    }
    Ok(outcome)
}

fn ingest_entry(
    entry: &ManifestEntry,
    base: &Path,
    options: &IngestOptions,
) -> Result<CorpusEntry, (RejectReason, String)> {
    let path = base.join(&entry.mesh);
    let bytes = std::fs::read(&path)
        .map_err(|e| (RejectReason::MissingFile, format!("cannot read {}: {e}", path.display())))?;
    let labels = entry
        .labels
        .iter()
        .map(|t| t.parse::<FunctionalityLabel>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| (RejectReason::UnknownLabel, e.to_string()))?;
    let format = MeshFormat::from_extension(&path);
    let mesh = parse_mesh(&bytes, format, &entry.thing_id).map_err(|e| (RejectReason::InvalidMesh, e.to_string()))?;

    let seed = entry.segmentation.seed.unwrap_or(options.segment.seed);
    let (mesh, segmentation) = match &entry.segmentation.face_labels {
        Some(face_labels) => {
            if face_labels.len() != mesh.face_count() {
                return Err((
                    RejectReason::FaceLabelMismatch,
                    format!("{} face labels for {} faces", face_labels.len(), mesh.face_count()),
                ));
            }
            let k = entry
                .segmentation
                .k
                .unwrap_or_else(|| face_labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0));
            let seg = SegmentationResult {
                k,
                predicted_k: k,
                requested_k: Some(k),
                seed,
                face_labels: face_labels.clone(),
                params: SegmentParams { seed, ..options.segment },
                eigenvalues: Vec::new(),
            };
            seg.validate(mesh.face_count()).map_err(|m| (RejectReason::FaceLabelMismatch, m))?;
            (mesh, seg)
        }
        None => {
            let remeshed = if options.remesh.accepts(mesh.face_count()) {
                mesh
            } else {
                remesh(&mesh, &options.remesh).map_err(|e| (RejectReason::SegmentationFailed, e.to_string()))?
            };
            let params = SegmentParams { seed, ..options.segment };
            let seg = segment(&remeshed, entry.segmentation.k, &params)
                .map_err(|e| (RejectReason::SegmentationFailed, e.to_string()))?;
            (remeshed, seg)
        }
    };
    if labels.len() != segmentation.k {
        return Err((
            RejectReason::LabelCountMismatch,
            format!("label-count mismatch: {} labels for k = {}", labels.len(), segmentation.k),
        ));
    }
    Ok(CorpusEntry {
        thing_id: entry.thing_id.clone(),
        group: entry.group.clone().unwrap_or_else(|| entry.thing_id.clone()),
        mesh_path: path,
        category: entry.category,
        composition: entry.composition,
        mesh,
        segmentation,
        segment_labels: labels,
    })
}
