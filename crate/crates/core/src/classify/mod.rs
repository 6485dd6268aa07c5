//! Segment functionality: external by a contextual-similarity kNN vote
//! against the corpus, internal by α-thresholded linkage across the
//! components of one design.

mod linkage;

pub use linkage::{detect_linkages, select_linkages, LinkComponent, Linkage, LinkageMode, LinkageSet, SegmentRef};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{query_similar, CorpusIndex, MeshMatch};
use crate::labels::FunctionalityLabel;
use crate::mesh::TriangleMesh;
use crate::shape::{contextual_similarity, describe, mrg_similarity, segment_submesh, Mrg, ShapeError, ShapeParams};
use crate::spectral::SegmentationResult;

pub const DEFAULT_ALPHA: f64 = 0.86;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("corpus index is empty")]
    EmptyIndex,
    #[error("corpus exhausted: no candidate segments for segment {segment}")]
    CorpusExhausted { segment: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyParams {
    pub n_meshes: usize,
    pub n_segments: usize,
    pub alpha: f64,
    pub linkage: LinkageMode,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            n_meshes: 5,
            n_segments: 5,
            alpha: DEFAULT_ALPHA,
            linkage: LinkageMode::Contextual,
        }
    }
}

impl ClassifyParams {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.n_meshes == 0 || self.n_segments == 0 {
            return Err(ClassifyError::InvalidParams("n_meshes and n_segments must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ClassifyError::InvalidParams(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// MRGs of a mesh and of each of its segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentShape {
    pub mesh: Mrg,
    pub segments: Vec<Mrg>,
    /// Segment was face-disconnected; its MRG covers the largest piece.
    pub disconnected: Vec<bool>,
}

/// MRG of segment `j`'s largest connected piece.
pub fn describe_segment(
    mesh: &TriangleMesh,
    segmentation: &SegmentationResult,
    j: usize,
    params: &ShapeParams,
) -> Result<(Mrg, bool), ShapeError> {
    let sub = segment_submesh(mesh, segmentation, j)?;
    Ok((describe(&sub.mesh, params)?, sub.disconnected))
}

pub fn describe_component(
    mesh: &TriangleMesh,
    segmentation: &SegmentationResult,
    params: &ShapeParams,
) -> Result<ComponentShape, ShapeError> {
    let whole = describe(mesh, params)?;
    let parts = (0..segmentation.k)
        .into_par_iter()
        .map(|j| describe_segment(mesh, segmentation, j, params))
        .collect::<Result<Vec<_>, _>>()?;
    let (segments, disconnected) = parts.into_iter().unzip();
    Ok(ComponentShape {
        mesh: whole,
        segments,
        disconnected,
    })
}

/// One neighbor segment's vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub thing_id: String,
    pub segment: usize,
    pub mesh_similarity: f64,
    pub segment_similarity: f64,
    pub contextual_similarity: f64,
    pub label: FunctionalityLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub segment: usize,
    pub label: FunctionalityLabel,
    pub functional_votes: usize,
    pub aesthetic_votes: usize,
    pub vote_detail: Vec<Vote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub mesh_id: String,
    pub mesh_neighbors: Vec<MeshMatch>,
    pub segments: Vec<SegmentReport>,
}

impl ClassificationReport {
    pub fn labels(&self) -> Vec<FunctionalityLabel> {
        self.segments.iter().map(|s| s.label).collect()
    }
}

/// Uniform majority over binary votes; an even split is functional.
pub fn majority(votes: &[FunctionalityLabel]) -> FunctionalityLabel {
    let functional = votes.iter().filter(|l| l.is_functional()).count();
    if 2 * functional >= votes.len() {
        FunctionalityLabel::FunctionalExternal
    } else {
        FunctionalityLabel::Aesthetic
    }
}

/// Describe the mesh and its segments at the index's settings, then vote.
pub fn classify_external(
    mesh: &TriangleMesh,
    segmentation: &SegmentationResult,
    index: &CorpusIndex,
    params: &ClassifyParams,
) -> Result<ClassificationReport, ClassifyError> {
    let shape = describe_component(mesh, segmentation, &index.params)?;
    classify_shape(&shape, mesh.name(), index, params, &|_| true)
}

/// External classification of an already described component against the
/// corpus entries accepted by `allow`.
pub fn classify_shape(
    shape: &ComponentShape,
    mesh_id: &str,
    index: &CorpusIndex,
    params: &ClassifyParams,
    allow: &(dyn Fn(usize) -> bool + Sync),
) -> Result<ClassificationReport, ClassifyError> {
    params.validate()?;
    if index.is_empty() {
        return Err(ClassifyError::EmptyIndex);
    }
    let w = index.params.weight;
    let neighbors = query_similar(&shape.mesh, index, params.n_meshes, allow)?;
    let segments = shape
        .segments
        .par_iter()
        .enumerate()
        .map(|(s, g)| {
            let mut pool = Vec::new();
            for n in &neighbors {
                let entry = &index.entries[n.entry];
                for (j, cand) in index.segment_mrgs[n.entry].iter().enumerate() {
                    let seg = mrg_similarity(g, cand, w)?.value;
                    pool.push(Vote {
                        thing_id: entry.thing_id.clone(),
                        segment: j,
                        mesh_similarity: n.similarity,
                        segment_similarity: seg,
                        contextual_similarity: contextual_similarity(n.similarity, seg),
                        label: entry.labels[j],
                    });
                }
            }
            if pool.is_empty() {
                return Err(ClassifyError::CorpusExhausted { segment: s });
            }
            pool.sort_by(|a, b| {
                b.contextual_similarity
                    .total_cmp(&a.contextual_similarity)
                    .then_with(|| a.thing_id.cmp(&b.thing_id))
                    .then(a.segment.cmp(&b.segment))
            });
            pool.truncate(params.n_segments);
            let labels: Vec<_> = pool.iter().map(|v| v.label).collect();
            let functional_votes = labels.iter().filter(|l| l.is_functional()).count();
            Ok(SegmentReport {
                segment: s,
                label: majority(&labels),
                functional_votes,
                aesthetic_votes: labels.len() - functional_votes,
                vote_detail: pool,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassificationReport {
        mesh_id: mesh_id.to_string(),
        mesh_neighbors: neighbors,
        segments,
    })
}

/// One mesh of a multi-part design.
#[derive(Debug, Clone, Copy)]
pub struct ThingComponent<'a> {
    pub mesh_id: &'a str,
    pub shape: &'a ComponentShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabels {
    pub mesh_id: String,
    pub labels: Vec<FunctionalityLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThingReport {
    pub reports: Vec<ClassificationReport>,
    pub linkages: LinkageSet,
    /// Final labels: external, then internal, then aesthetic.
    pub labels: Vec<ComponentLabels>,
    pub warnings: Vec<String>,
}

/// Combine external votes and linkages into one label per segment.
pub fn final_labels(reports: &[ClassificationReport], linkages: &LinkageSet) -> Vec<ComponentLabels> {
    reports
        .iter()
        .map(|r| {
            let labels = r
                .segments
                .iter()
                .map(|s| {
                    let linked = linkages.contains(&SegmentRef {
                        mesh_id: r.mesh_id.clone(),
                        segment: s.segment,
                    });
                    [s.label, if linked { FunctionalityLabel::FunctionalInternal } else { FunctionalityLabel::Aesthetic }]
                        .into_iter()
                        .max_by_key(|l| l.precedence())
                        .unwrap()
                })
                .collect();
            ComponentLabels {
                mesh_id: r.mesh_id.clone(),
                labels,
            }
        })
        .collect()
}

/// External classification of every component, then linkage detection
/// over the whole design.
pub fn classify_thing(
    components: &[ThingComponent<'_>],
    index: &CorpusIndex,
    params: &ClassifyParams,
) -> Result<ThingReport, ClassifyError> {
    if components.is_empty() {
        return Err(ClassifyError::InvalidParams("a thing needs at least one component".into()));
    }
    let reports = components
        .iter()
        .map(|c| classify_shape(c.shape, c.mesh_id, index, params, &|_| true))
        .collect::<Result<Vec<_>, _>>()?;
    let externals: Vec<Vec<FunctionalityLabel>> = reports.iter().map(ClassificationReport::labels).collect();
    let links: Vec<LinkComponent<'_>> = components
        .iter()
        .zip(&externals)
        .map(|(c, ext)| LinkComponent {
            mesh_id: c.mesh_id,
            shape: c.shape,
            external: ext,
        })
        .collect();
    let (linkages, warnings) = detect_linkages(&links, params.alpha, params.linkage, index.params.weight)?;
    let labels = final_labels(&reports, &linkages);
    Ok(ThingReport {
        reports,
        linkages,
        labels,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use FunctionalityLabel::*;

    #[test]
    fn majority_rule() {
        assert_eq!(
            majority(&[FunctionalExternal, FunctionalInternal, Aesthetic, FunctionalExternal, Aesthetic]),
            FunctionalExternal
        );
        assert_eq!(majority(&[FunctionalExternal, Aesthetic]), FunctionalExternal);
        assert_eq!(majority(&[Aesthetic, Aesthetic, FunctionalInternal]), Aesthetic);
    }

    #[test]
    fn params_validate() {
        assert!(ClassifyParams::default().validate().is_ok());
        for alpha in [-0.1, 1.5, f64::NAN] {
            let p = ClassifyParams {
                alpha,
                ..ClassifyParams::default()
            };
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn precedence_in_final_labels() {
        let seg = |segment, label| SegmentReport {
            segment,
            label,
            functional_votes: 0,
            aesthetic_votes: 0,
            vote_detail: Vec::new(),
        };
        let report = ClassificationReport {
            mesh_id: "m".into(),
            mesh_neighbors: Vec::new(),
            segments: vec![seg(0, FunctionalExternal), seg(1, Aesthetic), seg(2, Aesthetic)],
        };
        let r = |segment| SegmentRef {
            mesh_id: "m".into(),
            segment,
        };
        let other = SegmentRef {
            mesh_id: "n".into(),
            segment: 0,
        };
        let set = LinkageSet {
            alpha: 0.5,
            mode: LinkageMode::Contextual,
            pairs: vec![
                Linkage {
                    a: r(0),
                    b: other.clone(),
                    similarity: 0.9,
                },
                Linkage {
                    a: r(1),
                    b: other,
                    similarity: 0.9,
                },
            ],
        };
        let out = final_labels(&[report], &set);
        assert_eq!(out[0].labels, vec![FunctionalExternal, FunctionalInternal, Aesthetic]);
    }
}
