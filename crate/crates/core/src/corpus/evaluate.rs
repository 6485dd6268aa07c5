use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, CorpusIndex};
use crate::classify::{classify_shape, detect_linkages, ClassifyParams, ComponentShape, LinkComponent, SegmentRef};
use crate::labels::FunctionalityLabel;

/// Binary confusion counts with functional as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    /// `None` when nothing was predicted positive.
    pub precision: Option<f64>,
    /// `None` when there were no positives.
    pub recall: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl TaskMetrics {
    fn record(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.true_positives += 1,
            (true, false) => self.false_positives += 1,
            (false, true) => self.false_negatives += 1,
            (false, false) => self.true_negatives += 1,
        }
    }

    fn finish(mut self) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        self.precision = ratio(self.true_positives, self.true_positives + self.false_positives);
        self.recall = ratio(self.true_positives, self.true_positives + self.false_negatives);
        self
    }

    pub fn support(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds: usize,
    pub seed: u64,
    /// Functional (either kind) vs aesthetic, from the kNN vote.
    pub external: TaskMetrics,
    /// Functional-internal vs not, from linkage detection inside each
    /// held-out multi-component group.
    pub internal: TaskMetrics,
}

/// Group-aware k-fold cross-validation. Entries sharing a group are held
/// out together, so no held-out segment is ever matched against its own
/// design.
pub fn evaluate(
    index: &CorpusIndex,
    folds: usize,
    seed: u64,
    params: &ClassifyParams,
) -> Result<EvaluationReport, CorpusError> {
    if folds < 2 {
        return Err(CorpusError::Precondition(format!("need at least 2 folds, got {folds}")));
    }
    if index.len() < folds {
        return Err(CorpusError::Precondition(format!(
            "{} entries cannot fill {folds} folds",
            index.len()
        )));
    }
    let groups: BTreeSet<&str> = index.entries.iter().map(|e| e.group.as_str()).collect();
    if groups.len() < folds {
        return Err(CorpusError::Precondition(format!(
            "{} groups cannot fill {folds} folds",
            groups.len()
        )));
    }
    let mut groups: Vec<&str> = groups.into_iter().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of_group: BTreeMap<&str, usize> = groups.iter().enumerate().map(|(i, g)| (*g, i % folds)).collect();
    let fold_of: Vec<usize> = index.entries.iter().map(|e| fold_of_group[e.group.as_str()]).collect();

    let shapes: Vec<ComponentShape> = (0..index.len())
        .map(|i| ComponentShape {
            mesh: index.mesh_mrgs[i].clone(),
            segments: index.segment_mrgs[i].clone(),
            disconnected: vec![false; index.segment_mrgs[i].len()],
        })
        .collect();

    let mut external = TaskMetrics::default();
    let mut internal = TaskMetrics::default();
    for fold in 0..folds {
        let allow = |i: usize| fold_of[i] != fold;
        let held: Vec<usize> = (0..index.len()).filter(|&i| fold_of[i] == fold).collect();
        for &i in &held {
            let entry = &index.entries[i];
            let report = classify_shape(&shapes[i], &entry.thing_id, index, params, &allow)?;
            for (s, truth) in report.segments.iter().zip(&entry.labels) {
                external.record(s.label.is_functional(), truth.is_functional());
            }
        }

        let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in &held {
            by_group.entry(index.entries[i].group.as_str()).or_default().push(i);
        }
        for members in by_group.values().filter(|m| m.len() >= 2) {
            let components: Vec<LinkComponent<'_>> = members
                .iter()
                .map(|&i| LinkComponent {
                    mesh_id: &index.entries[i].thing_id,
                    shape: &shapes[i],
                    external: &index.entries[i].labels,
                })
                .collect();
            let (links, _) = detect_linkages(&components, params.alpha, params.linkage, index.params.weight)?;
            for &i in members {
                let entry = &index.entries[i];
                for (j, truth) in entry.labels.iter().enumerate() {
                    if *truth == FunctionalityLabel::FunctionalExternal {
                        continue;
                    }
                    let linked = links.contains(&SegmentRef {
                        mesh_id: entry.thing_id.clone(),
                        segment: j,
                    });
                    internal.record(linked, *truth == FunctionalityLabel::FunctionalInternal);
                }
            }
        }
    }
    Ok(EvaluationReport {
        folds,
        seed,
        external: external.finish(),
        internal: internal.finish(),
    })
}
