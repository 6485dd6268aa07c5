//! Bundled starter corpus of parametric solids of revolution whose segment
//! labels are known by construction: vases, planters, stands and snap-fit
//! pairs.

use std::path::{Path, PathBuf};

use serde_json::json;

use super::CorpusEntry;
use crate::labels::{Category, Composition, FunctionalityLabel};
use crate::mesh::{write_obj, TriangleMesh};
use crate::primitives::{resample_profile, revolve};
use crate::spectral::SegmentationResult;

use FunctionalityLabel::{Aesthetic, FunctionalExternal, FunctionalInternal};

/// Facets around the axis.
const AROUND: usize = 48;
/// Profile pieces for a whole model, before rounding per leg.
const ALONG: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub thing_id: String,
    pub group: String,
    pub category: Category,
    pub composition: Composition,
    pub mesh: TriangleMesh,
    pub face_labels: Vec<u32>,
    pub labels: Vec<FunctionalityLabel>,
}

impl SyntheticModel {
    pub fn segmentation(&self) -> SegmentationResult {
        let k = self.labels.len();
        SegmentationResult {
            k,
            predicted_k: k,
            requested_k: Some(k),
            seed: 0,
            face_labels: self.face_labels.clone(),
            params: Default::default(),
            eigenvalues: Vec::new(),
        }
    }

    pub fn to_entry(&self) -> CorpusEntry {
        CorpusEntry {
            thing_id: self.thing_id.clone(),
            group: self.group.clone(),
            mesh_path: PathBuf::from(format!("{}.obj", self.thing_id)),
            category: self.category,
            composition: self.composition,
            mesh: self.mesh.clone(),
            segmentation: self.segmentation(),
            segment_labels: self.labels.clone(),
        }
    }

    /// The same model under another id and group.
    pub fn renamed(&self, thing_id: &str, group: &str) -> Self {
        Self {
            thing_id: thing_id.into(),
            group: group.into(),
            mesh: self.mesh.clone().with_name(thing_id),
            ..self.clone()
        }
    }
}

/// Revolve a tagged profile. Leg `i` runs from point `i` to `i + 1` and its
/// faces get segment `tags[i]`, whose label is `labels[tags[i]]`.
fn model(
    step: f64,
    id: &str,
    group: &str,
    category: Category,
    composition: Composition,
    profile: &[(f64, f64)],
    tags: &[u32],
    labels: &[FunctionalityLabel],
) -> SyntheticModel {
    let (points, point_tags) = resample_profile(profile, tags, step);
    let (mesh, face_labels) = revolve(&points, &point_tags, AROUND);
    SyntheticModel {
        thing_id: id.into(),
        group: group.into(),
        category,
        composition,
        mesh: mesh.with_name(id),
        face_labels,
        labels: labels.to_vec(),
    }
}

fn profile_length(profile: &[(f64, f64)]) -> f64 {
    profile
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum()
}

fn single(id: &str, category: Category, profile: &[(f64, f64)], tags: &[u32], labels: &[FunctionalityLabel]) -> SyntheticModel {
    let step = profile_length(profile) / ALONG;
    model(step, id, id, category, Composition::Single, profile, tags, labels)
}

/// Vase: flat foot, bulging body, narrow neck, flared lip.
pub fn vase(id: &str, radius: f64, height: f64, neck: f64) -> SyntheticModel {
    let foot = 0.6 * radius;
    let profile = [
        (0.0, 0.0),
        (foot, 0.0),
        (radius, 0.35 * height),
        (radius * 0.9, 0.6 * height),
        (neck, 0.85 * height),
        (neck * 1.3, height),
        (0.0, height),
    ];
    single(
        id,
        Category::Artifact,
        &profile,
        &[0, 1, 1, 2, 2, 3],
        &[FunctionalExternal, Aesthetic, Aesthetic, Aesthetic],
    )
}

/// Planter: wide base, tapered wall, rolled rim.
pub fn planter(id: &str, radius: f64, height: f64, taper: f64) -> SyntheticModel {
    let base = radius * taper;
    let profile = [
        (0.0, 0.0),
        (base, 0.0),
        (radius, height),
        (radius * 1.12, height),
        (radius * 1.12, height * 1.08),
        (0.0, height * 1.08),
    ];
    single(
        id,
        Category::Artifact,
        &profile,
        &[0, 1, 2, 2, 3],
        &[FunctionalExternal, Aesthetic, Aesthetic, Aesthetic],
    )
}

/// Stand: foot disk, slender stem, cradle on top that holds an object.
pub fn stand(id: &str, foot: f64, stem: f64, height: f64, cradle: f64) -> SyntheticModel {
    let profile = [
        (0.0, 0.0),
        (foot, 0.0),
        (foot, 0.08 * height),
        (stem, 0.12 * height),
        (stem, 0.8 * height),
        (cradle, 0.9 * height),
        (cradle, height),
        (0.0, height),
    ];
    single(
        id,
        Category::TaskRelated,
        &profile,
        &[0, 0, 1, 1, 2, 2, 2],
        &[FunctionalExternal, Aesthetic, FunctionalExternal],
    )
}

/// Geometry of one snap-fit pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapFit {
    /// Radius and height of the lid shell.
    pub lid: (f64, f64),
    /// Radius and height of the base shell.
    pub base: (f64, f64),
    /// Radius and depth of the plug (and of the matching socket).
    pub plug: (f64, f64),
}

impl Default for SnapFit {
    fn default() -> Self {
        Self {
            lid: (30.0, 20.0),
            base: (30.0, 30.0),
            plug: (10.0, 8.0),
        }
    }
}

/// Lid with a plug underneath, and a base with a matching socket on top.
pub fn snap_fit(group: &str, spec: SnapFit) -> (SyntheticModel, SyntheticModel) {
    let (lr, lh) = spec.lid;
    let (br, bh) = spec.base;
    let (pr, pd) = spec.plug;
    let lid_profile = [(0.0, -pd), (pr, -pd), (pr, 0.0), (lr, 0.0), (lr, lh), (0.0, lh)];
    let base_profile = [(0.0, 0.0), (br, 0.0), (br, bh), (pr, bh), (pr, bh - pd), (0.0, bh - pd)];
    // One step for both parts keeps plug and socket tessellated alike.
    let step = profile_length(&lid_profile).max(profile_length(&base_profile)) / ALONG;
    let lid = model(
        step,
        &format!("{group}-lid"),
        group,
        Category::TaskRelated,
        Composition::Multi,
        &lid_profile,
        &[0, 0, 1, 1, 1],
        &[FunctionalInternal, Aesthetic],
    );
    let base = model(
        step,
        &format!("{group}-base"),
        group,
        Category::TaskRelated,
        Composition::Multi,
        &base_profile,
        &[0, 1, 1, 2, 2],
        &[FunctionalExternal, Aesthetic, FunctionalInternal],
    );
    (lid, base)
}

/// The bundled starter corpus.
pub fn starter_set() -> Vec<SyntheticModel> {
    let mut out = vec![
        vase("vase-tall", 40.0, 160.0, 14.0),
        vase("vase-round", 55.0, 110.0, 20.0),
        vase("vase-slim", 30.0, 180.0, 10.0),
        planter("planter-wide", 70.0, 60.0, 0.75),
        planter("planter-deep", 50.0, 90.0, 0.6),
        stand("stand-phone", 45.0, 8.0, 120.0, 25.0),
        stand("stand-egg", 35.0, 6.0, 70.0, 20.0),
    ];
    let (lid, base) = snap_fit("snap-jar", SnapFit::default());
    out.extend([lid, base]);
    let (lid, base) = snap_fit(
        "snap-box",
        SnapFit {
            lid: (45.0, 37.5),
            base: (45.0, 52.5),
            plug: (12.0, 9.0),
        },
    );
    out.extend([lid, base]);
    out
}

/// Write meshes and a manifest for `models` into `dir`; returns the
/// manifest path.
pub fn write_corpus(models: &[SyntheticModel], dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir.join("meshes"))?;
    let mut manifest = Vec::new();
    for m in models {
        let rel = format!("meshes/{}.obj", m.thing_id);
        std::fs::write(dir.join(&rel), write_obj(&m.mesh))?;
        manifest.push(json!({
            "thing_id": m.thing_id,
            "mesh": rel,
            "category": m.category,
            "composition": m.composition,
            "group": m.group,
            "segmentation": {"k": m.labels.len(), "face_labels": m.face_labels},
            "labels": m.labels,
        }));
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshTopology;

    #[test]
    fn models_are_closed_and_labeled() {
        let set = starter_set();
        assert!(set.len() >= 10);
        for m in &set {
            let t = MeshTopology::build(&m.mesh);
            assert!(t.boundary_edges.is_empty(), "{}", m.thing_id);
            assert!((1500..=6000).contains(&m.mesh.face_count()), "{} {}", m.thing_id, m.mesh.face_count());
            m.segmentation().validate(m.mesh.face_count()).unwrap();
        }
    }

    #[test]
    fn written_corpus_ingests() {
        let dir = tempfile::tempdir().unwrap();
        let set = starter_set();
        let manifest = write_corpus(&set[..3], dir.path()).unwrap();
        let out = super::super::ingest(&manifest, &Default::default()).unwrap();
        assert!(out.rejected.is_empty(), "{:?}", out.rejected);
        assert_eq!(out.entries.len(), 3);
        assert_eq!(out.entries[0].segmentation.face_labels, set[0].face_labels);
    }
}
