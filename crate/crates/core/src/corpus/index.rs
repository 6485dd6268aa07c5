use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info, warn};

use super::{io_err, sha256_hex, CorpusEntry, CorpusError};
use crate::classify::describe_segment;
use crate::labels::{Category, Composition, FunctionalityLabel};
use crate::mesh::{parse_obj, write_obj, TriangleMesh};
use crate::shape::{describe, mrg_similarity, sidecar, Mrg, ShapeError, ShapeParams};
use crate::spectral::SegmentationResult;

pub const INDEX_VERSION: u32 = 1;

/// Everything about a corpus entry except its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedEntry {
    pub thing_id: String,
    pub group: String,
    pub category: Category,
    pub composition: Composition,
    /// Where the mesh was ingested from. Informational only.
    pub source: String,
    /// SHA-256 of the processed mesh as written to `meshes/<id>.obj`.
    pub mesh_sha256: String,
    pub face_count: usize,
    pub segmentation: SegmentationResult,
    pub labels: Vec<FunctionalityLabel>,
}

/// The classifier's knowledge base: per-entry metadata plus one MRG per
/// mesh and one per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIndex {
    pub version: u32,
    pub manifest_sha256: String,
    pub params: ShapeParams,
    pub entries: Vec<IndexedEntry>,
    pub mesh_mrgs: Vec<Mrg>,
    pub segment_mrgs: Vec<Vec<Mrg>>,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.segment_mrgs.iter().map(Vec::len).sum()
    }

    pub fn position(&self, thing_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.thing_id == thing_id)
    }

    pub fn shape(&self, entry: usize) -> (&Mrg, &[Mrg]) {
        (&self.mesh_mrgs[entry], &self.segment_mrgs[entry])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    /// MRGs computed in this run.
    pub computed: usize,
    /// MRGs read back from valid sidecars.
    pub loaded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMatch {
    pub entry: usize,
    pub thing_id: String,
    pub similarity: f64,
}

#[derive(Serialize, Deserialize)]
struct StoredManifest {
    version: u32,
    params: ShapeParams,
    entries: Vec<IndexedEntry>,
}

#[derive(Serialize, Deserialize)]
struct Hashes {
    version: u32,
    manifest_sha256: String,
    files: BTreeMap<String, String>,
}

fn mesh_sidecar(id: &str) -> String {
    format!("mrg/{id}.mrg1")
}

fn segment_sidecar(id: &str, j: usize) -> String {
    format!("mrg/{id}__seg{j}.mrg1")
}

fn mesh_file(id: &str) -> String {
    format!("meshes/{id}.obj")
}

fn manifest_hash(params: &ShapeParams, entries: &[IndexedEntry]) -> String {
    // The source path does not affect any MRG, so it stays out of the hash.
    let keyed: Vec<_> = entries
        .iter()
        .map(|e| IndexedEntry {
            source: String::new(),
            ..e.clone()
        })
        .collect();
    let body = StoredManifest {
        version: INDEX_VERSION,
        params: *params,
        entries: keyed,
    };
    sha256_hex(&serde_json::to_vec(&body).expect("manifest serializes"))
}

fn read_sidecar(dir: &Path, name: &str, expected_sha: Option<&String>, resolution: u32) -> Option<Mrg> {
    let bytes = std::fs::read(dir.join(name)).ok()?;
    if expected_sha != Some(&sha256_hex(&bytes)) {
        return None;
    }
    sidecar::from_bytes(&bytes).ok().filter(|g| g.resolution == resolution)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CorpusError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    if std::fs::read(&path).ok().as_deref() == Some(bytes) {
        return Ok(());
    }
    std::fs::write(&path, bytes).map_err(io_err(&path))
}

/// Compute (or load cached) MRGs for every entry. With `dir`, the index is
/// persisted there; sidecars whose manifest hash and checksum still match
/// are reused and anything missing or corrupt is recomputed.
pub fn build_index(
    entries: &[CorpusEntry],
    params: &ShapeParams,
    dir: Option<&Path>,
) -> Result<(CorpusIndex, BuildStats), CorpusError> {
    if entries.is_empty() {
        return Err(CorpusError::Empty);
    }
    params.validate()?;
    for e in entries {
        if e.thing_id.contains("__") || !super::valid_thing_id(&e.thing_id) {
            return Err(CorpusError::Precondition(format!(
                "thing_id {:?} cannot name index files",
                e.thing_id
            )));
        }
    }
    // MRGs are computed from the mesh as stored on disk, so a reloaded
    // index reproduces them exactly.
    let (objs, meshes): (Vec<String>, Vec<TriangleMesh>) = entries
        .par_iter()
        .map(|e| {
            let obj = write_obj(&e.mesh.clone().with_name(e.thing_id.clone()));
            let mesh = parse_obj(obj.as_bytes()).map_err(|err| CorpusError::Precondition(format!("{}: {err}", e.thing_id)))?;
            Ok((obj, mesh))
        })
        .collect::<Result<Vec<_>, CorpusError>>()?
        .into_iter()
        .unzip();
    let meta: Vec<IndexedEntry> = entries
        .iter()
        .zip(&objs)
        .map(|(e, obj)| IndexedEntry {
            thing_id: e.thing_id.clone(),
            group: e.group.clone(),
            category: e.category,
            composition: e.composition,
            source: e.mesh_path.display().to_string(),
            mesh_sha256: sha256_hex(obj.as_bytes()),
            face_count: e.mesh.face_count(),
            segmentation: e.segmentation.clone(),
            labels: e.segment_labels.clone(),
        })
        .collect();
    let manifest_sha256 = manifest_hash(params, &meta);

    let cached: Option<Hashes> = dir
        .and_then(|d| std::fs::read(d.join("hashes.json")).ok())
        .and_then(|b| serde_json::from_slice::<Hashes>(&b).ok())
        .filter(|h| h.version == INDEX_VERSION && h.manifest_sha256 == manifest_sha256);
    if dir.is_some() {
        debug!(hit = cached.is_some(), "index cache");
    }

    let shapes: Vec<(Mrg, Vec<Mrg>, BuildStats)> = entries
        .par_iter()
        .zip(&meshes)
        .map(|(e, canonical)| -> Result<_, CorpusError> {
            let mut stats = BuildStats::default();
            let load = |name: &str| {
                let (d, h) = (dir?, cached.as_ref()?);
                read_sidecar(d, name, h.files.get(name), params.resolution)
            };
            let mesh = match load(&mesh_sidecar(&e.thing_id)) {
                Some(g) => {
                    stats.loaded += 1;
                    g
                }
                None => {
                    stats.computed += 1;
                    describe(canonical, params)?
                }
            };
            let mut segments = Vec::with_capacity(e.segmentation.k);
            for j in 0..e.segmentation.k {
                match load(&segment_sidecar(&e.thing_id, j)) {
                    Some(g) => {
                        stats.loaded += 1;
                        segments.push(g);
                    }
                    None => {
                        stats.computed += 1;
                        segments.push(describe_segment(canonical, &e.segmentation, j, params)?.0);
                    }
                }
            }
            Ok((mesh, segments, stats))
        })
        .collect::<Result<_, _>>()?;

    let mut stats = BuildStats::default();
    let mut mesh_mrgs = Vec::with_capacity(shapes.len());
    let mut segment_mrgs = Vec::with_capacity(shapes.len());
    for (mesh, segments, s) in shapes {
        stats.computed += s.computed;
        stats.loaded += s.loaded;
        mesh_mrgs.push(mesh);
        segment_mrgs.push(segments);
    }
    let index = CorpusIndex {
        version: INDEX_VERSION,
        manifest_sha256,
        params: *params,
        entries: meta,
        mesh_mrgs,
        segment_mrgs,
    };
    if let Some(d) = dir {
        persist(&index, &objs, d)?;
    }
    info!(entries = index.len(), computed = stats.computed, loaded = stats.loaded, "index built");
    Ok((index, stats))
}

fn persist(index: &CorpusIndex, objs: &[String], dir: &Path) -> Result<(), CorpusError> {
    let mut files = BTreeMap::new();
    for (i, e) in index.entries.iter().enumerate() {
        let name = mesh_sidecar(&e.thing_id);
        let bytes = sidecar::to_bytes(&index.mesh_mrgs[i]);
        files.insert(name.clone(), sha256_hex(&bytes));
        write_file(dir, &name, &bytes)?;
        for (j, g) in index.segment_mrgs[i].iter().enumerate() {
            let name = segment_sidecar(&e.thing_id, j);
            let bytes = sidecar::to_bytes(g);
            files.insert(name.clone(), sha256_hex(&bytes));
            write_file(dir, &name, &bytes)?;
        }
        write_file(dir, &mesh_file(&e.thing_id), objs[i].as_bytes())?;
    }
    let manifest = StoredManifest {
        version: INDEX_VERSION,
        params: index.params,
        entries: index.entries.clone(),
    };
    write_file(dir, "manifest.json", pretty(&manifest).as_bytes())?;
    let hashes = Hashes {
        version: INDEX_VERSION,
        manifest_sha256: index.manifest_sha256.clone(),
        files,
    };
    write_file(dir, "hashes.json", pretty(&hashes).as_bytes())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Reload a persisted index. Sidecars are verified against `hashes.json`;
/// bad ones are recomputed from the stored meshes and rewritten.
pub fn load_index(dir: &Path) -> Result<(CorpusIndex, BuildStats), CorpusError> {
    let manifest_path = dir.join("manifest.json");
    let bytes = std::fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let stored: StoredManifest = serde_json::from_slice(&bytes).map_err(|e| CorpusError::Index {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    if stored.version != INDEX_VERSION {
        return Err(CorpusError::Index {
            path: manifest_path,
            message: format!("index version {} (expected {INDEX_VERSION})", stored.version),
        });
    }
    let entries = stored
        .entries
        .par_iter()
        .map(|e| {
            let path = dir.join(mesh_file(&e.thing_id));
            let obj = std::fs::read(&path).map_err(io_err(&path))?;
            let bad = |message: String| CorpusError::Index {
                path: path.clone(),
                message,
            };
            if sha256_hex(&obj) != e.mesh_sha256 {
                return Err(bad("mesh checksum mismatch".into()));
            }
            let mesh = parse_obj(&obj).map_err(|err| bad(err.to_string()))?.with_name(e.thing_id.clone());
            Ok(CorpusEntry {
                thing_id: e.thing_id.clone(),
                group: e.group.clone(),
                mesh_path: PathBuf::from(&e.source),
                category: e.category,
                composition: e.composition,
                mesh,
                segmentation: e.segmentation.clone(),
                segment_labels: e.labels.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    build_index(&entries, &stored.params, Some(dir))
}

/// Rank allowed corpus meshes by MRG similarity to `query`: descending
/// score, ties by `thing_id`.
pub fn query_similar(
    query: &Mrg,
    index: &CorpusIndex,
    top_n: usize,
    allow: &(dyn Fn(usize) -> bool + Sync),
) -> Result<Vec<MeshMatch>, ShapeError> {
    let mut scored = (0..index.len())
        .into_par_iter()
        .filter(|&i| allow(i))
        .map(|i| {
            Ok(MeshMatch {
                entry: i,
                thing_id: index.entries[i].thing_id.clone(),
                similarity: mrg_similarity(query, &index.mesh_mrgs[i], index.params.weight)?.value,
            })
        })
        .collect::<Result<Vec<_>, ShapeError>>()?;
    scored.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.thing_id.cmp(&b.thing_id)));
    scored.truncate(top_n);
    Ok(scored)
}

/// The `top_n` corpus meshes most similar to `mesh`.
pub fn query_similar_meshes(
    mesh: &TriangleMesh,
    index: &CorpusIndex,
    top_n: usize,
) -> Result<Vec<MeshMatch>, CorpusError> {
    if index.is_empty() {
        return Err(CorpusError::Empty);
    }
    if top_n == 0 {
        return Err(CorpusError::Precondition("top_n must be at least 1".into()));
    }
    let g = describe(mesh, &index.params)?;
    if g.resolution != index.params.resolution {
        warn!("query resolution differs from index");
    }
    Ok(query_similar(&g, index, top_n, &|_| true)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;

    fn entry(id: &str, mesh: TriangleMesh, k: usize) -> CorpusEntry {
        let n = mesh.face_count();
        let labels: Vec<u32> = (0..n).map(|f| (f * k / n) as u32).collect();
        CorpusEntry {
            thing_id: id.into(),
            group: id.into(),
            mesh_path: PathBuf::from(format!("{id}.obj")),
            category: Category::Artifact,
            composition: Composition::Single,
            mesh,
            segmentation: SegmentationResult::from_labels(&labels, 0),
            segment_labels: vec![FunctionalityLabel::Aesthetic; k],
        }
    }

    fn small_corpus() -> Vec<CorpusEntry> {
        vec![
            entry("cyl", primitives::cylinder(1.0, 4.0, 16, 0.5), 4),
            entry("sphere", primitives::icosphere(1.0, 2), 3),
            entry("star", primitives::star(3, 1.5, 2), 4),
        ]
    }

    fn params() -> ShapeParams {
        ShapeParams {
            base_points: 64,
            ..ShapeParams::default()
        }
    }

    #[test]
    fn counts_mrgs() {
        let (index, stats) = build_index(&small_corpus(), &params(), None).unwrap();
        assert_eq!(index.mesh_mrgs.len(), 3);
        assert_eq!(index.segment_count(), 11);
        assert_eq!(stats.computed, 14);
    }

    #[test]
    fn cache_hit_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus();
        let (first, s1) = build_index(&corpus, &params(), Some(dir.path())).unwrap();
        assert_eq!((s1.computed, s1.loaded), (14, 0));
        let (second, s2) = build_index(&corpus, &params(), Some(dir.path())).unwrap();
        assert_eq!((s2.computed, s2.loaded), (0, 14));
        assert_eq!(first, second);

        let victim = dir.path().join("mrg/star__seg1.mrg1");
        let mut bytes = std::fs::read(&victim).unwrap();
        bytes[20] ^= 0xff;
        std::fs::write(&victim, bytes).unwrap();
        let (third, s3) = load_index(dir.path()).unwrap();
        assert_eq!((s3.computed, s3.loaded), (1, 13));
        assert_eq!(third.segment_mrgs, first.segment_mrgs);
    }

    #[test]
    fn index_is_byte_identical() {
        let corpus = small_corpus();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        build_index(&corpus, &params(), Some(a.path())).unwrap();
        build_index(&corpus, &params(), Some(b.path())).unwrap();
        for name in ["manifest.json", "hashes.json", "mrg/cyl__seg2.mrg1", "meshes/star.obj"] {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn changed_labels_invalidate() {
        let dir = tempfile::tempdir().unwrap();
        let mut corpus = small_corpus();
        build_index(&corpus, &params(), Some(dir.path())).unwrap();
        corpus[0].segment_labels[0] = FunctionalityLabel::FunctionalExternal;
        let (_, s) = build_index(&corpus, &params(), Some(dir.path())).unwrap();
        assert_eq!(s.computed, 14);
    }

    #[test]
    fn query_ranking() {
        let corpus = small_corpus();
        let (index, _) = build_index(&corpus, &params(), None).unwrap();
        let hits = query_similar_meshes(&corpus[1].mesh, &index, 5).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].thing_id, "sphere");
        assert!(hits[0].similarity >= 1.0 - 1e-6);
        assert!(hits.windows(2).all(|w| w[0].similarity >= w[1].similarity));
    }

    #[test]
    fn ties_break_by_thing_id() {
        let m = primitives::icosphere(1.0, 2);
        let corpus = vec![entry("b", m.clone(), 1), entry("a", m.clone(), 1), entry("c", m.clone(), 1)];
        let (index, _) = build_index(&corpus, &params(), None).unwrap();
        let hits = query_similar_meshes(&m, &index, 2).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.thing_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_index(&[], &params(), None), Err(CorpusError::Empty)));
    }
}
