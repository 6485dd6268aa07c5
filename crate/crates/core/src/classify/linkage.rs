use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{ClassifyError, ComponentShape};
use crate::labels::FunctionalityLabel;
use crate::shape::{contextual_similarity, mrg_similarity};

/// Which similarity drives linkage detection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkageMode {
    /// Segment similarity times parent-mesh similarity.
    #[default]
    Contextual,
    /// Segment similarity alone.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentRef {
    pub mesh_id: String,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub a: SegmentRef,
    pub b: SegmentRef,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageSet {
    pub alpha: f64,
    pub mode: LinkageMode,
    /// In the order they were accepted: descending similarity.
    pub pairs: Vec<Linkage>,
}

impl LinkageSet {
    pub fn empty(alpha: f64, mode: LinkageMode) -> Self {
        Self {
            alpha,
            mode,
            pairs: Vec::new(),
        }
    }

    pub fn contains(&self, s: &SegmentRef) -> bool {
        self.pairs.iter().any(|p| &p.a == s || &p.b == s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinkComponent<'a> {
    pub mesh_id: &'a str,
    pub shape: &'a ComponentShape,
    /// External labels per segment; functional ones are not linkable.
    pub external: &'a [FunctionalityLabel],
}

/// Greedy cross-component matching: candidates above `alpha` (strictly)
/// are taken in descending similarity, each segment at most once.
///
/// Components are handled in `mesh_id` order and each pair's similarity is
/// computed with the lower id on the left, so the result does not depend on
/// the order of `components`.
pub fn detect_linkages(
    components: &[LinkComponent<'_>],
    alpha: f64,
    mode: LinkageMode,
    weight: f64,
) -> Result<(LinkageSet, Vec<String>), ClassifyError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ClassifyError::InvalidParams(format!("alpha {alpha} not in [0, 1]")));
    }
    let mut warnings = Vec::new();
    if components.len() < 2 {
        let msg = "linkage detection needs at least two components; none detected".to_string();
        warn!("{msg}");
        warnings.push(msg);
        return Ok((LinkageSet::empty(alpha, mode), warnings));
    }
    let mut order: Vec<&LinkComponent<'_>> = components.iter().collect();
    order.sort_by(|a, b| a.mesh_id.cmp(b.mesh_id));
    for pair in order.windows(2) {
        if pair[0].mesh_id == pair[1].mesh_id {
            return Err(ClassifyError::InvalidParams(format!("duplicate component {:?}", pair[0].mesh_id)));
        }
    }
    for c in &order {
        if c.external.len() != c.shape.segments.len() {
            return Err(ClassifyError::InvalidParams(format!(
                "{}: {} external labels for {} segments",
                c.mesh_id,
                c.external.len(),
                c.shape.segments.len()
            )));
        }
    }

    let mut candidates: Vec<Linkage> = Vec::new();
    for (x, left) in order.iter().enumerate() {
        for right in &order[x + 1..] {
            let mesh_sim = match mode {
                LinkageMode::Contextual => mrg_similarity(&left.shape.mesh, &right.shape.mesh, weight)?.value,
                LinkageMode::Raw => 1.0,
            };
            for (i, gi) in left.shape.segments.iter().enumerate() {
                if left.external[i] == FunctionalityLabel::FunctionalExternal {
                    continue;
                }
                for (j, gj) in right.shape.segments.iter().enumerate() {
                    if right.external[j] == FunctionalityLabel::FunctionalExternal {
                        continue;
                    }
                    let seg = mrg_similarity(gi, gj, weight)?.value;
                    let similarity = contextual_similarity(mesh_sim, seg);
                    if similarity > alpha {
                        candidates.push(Linkage {
                            a: SegmentRef {
                                mesh_id: left.mesh_id.to_string(),
                                segment: i,
                            },
                            b: SegmentRef {
                                mesh_id: right.mesh_id.to_string(),
                                segment: j,
                            },
                            similarity,
                        });
                    }
                }
            }
        }
    }
    Ok((select_linkages(candidates, alpha, mode), warnings))
}

/// Greedy selection over precomputed candidates. Also the reference used
/// by property tests.
pub fn select_linkages(mut candidates: Vec<Linkage>, alpha: f64, mode: LinkageMode) -> LinkageSet {
    candidates.sort_by(|p, q| {
        q.similarity
            .total_cmp(&p.similarity)
            .then_with(|| p.a.cmp(&q.a))
            .then_with(|| p.b.cmp(&q.b))
    });
    let mut used = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for c in candidates {
        if c.similarity > alpha && !used.contains(&c.a) && !used.contains(&c.b) {
            used.insert(c.a.clone());
            used.insert(c.b.clone());
            pairs.push(c);
        }
    }
    LinkageSet { alpha, mode, pairs }
}
