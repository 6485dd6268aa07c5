use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use fabseg_core::classify::{
    final_labels, ComponentLabels, ComponentShape, Linkage, LinkageSet, ThingReport,
};
use fabseg_core::classify::ClassifyParams;
use fabseg_core::mesh::{parse_obj, write_obj, TriangleMesh};
use fabseg_core::spectral::SegmentationResult;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::api::{ClassificationView, LabelOverride, MeshInfo, ProcessInfo, SegmentResponse, ThingView};

pub(crate) fn new_id(prefix: char) -> String {
    let id = uuid::Uuid::new_v4().simple().to_string();
    format!("{prefix}{}", &id[..12])
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SegRecord {
    pub segmentation_id: String,
    pub result: SegmentationResult,
}

/// Immutable snapshot of one mesh; writers swap in a new one.
#[derive(Debug, Clone)]
pub(crate) struct MeshState {
    pub id: String,
    pub mesh: Arc<TriangleMesh>,
    pub sha256: String,
    pub derived_from: Option<String>,
    pub processed: Option<ProcessInfo>,
    pub segmentation: Option<Arc<SegRecord>>,
}

impl MeshState {
    /// Round-trips the mesh through OBJ so memory and disk agree exactly.
    pub fn new(id: String, mesh: &TriangleMesh, derived_from: Option<String>) -> Result<Self, fabseg_core::mesh::MeshError> {
        let obj = write_obj(&mesh.clone().with_name(&id));
        let mesh = parse_obj(obj.as_bytes())?;
        Ok(Self {
            id,
            sha256: sha256_hex(obj.as_bytes()),
            mesh: Arc::new(mesh),
            derived_from,
            processed: None,
            segmentation: None,
        })
    }

    pub fn info(&self) -> MeshInfo {
        MeshInfo {
            mesh_id: self.id.clone(),
            name: self.mesh.name().to_string(),
            vertex_count: self.mesh.vertex_count(),
            face_count: self.mesh.face_count(),
            has_colors: self.mesh.colors().is_some(),
            sha256: self.sha256.clone(),
            derived_from: self.derived_from.clone(),
            processed: self.processed.clone(),
            segmentation_id: self.segmentation.as_ref().map(|s| s.segmentation_id.clone()),
        }
    }

    pub fn segment_response(&self) -> Option<SegmentResponse> {
        self.segmentation.as_ref().map(|s| SegmentResponse {
            mesh_id: self.id.clone(),
            segmentation_id: s.segmentation_id.clone(),
            segmentation: s.result.clone(),
        })
    }
}

pub(crate) struct MeshSlot {
    /// Serializes mutating operations on this mesh.
    pub op: Arc<tokio::sync::Mutex<()>>,
    state: RwLock<Arc<MeshState>>,
    touched: Mutex<Instant>,
}

impl MeshSlot {
    pub fn snapshot(&self) -> Arc<MeshState> {
        *self.touched.lock().unwrap() = Instant::now();
        self.state.read().unwrap().clone()
    }

    pub fn replace(&self, state: MeshState) {
        *self.state.write().unwrap() = Arc::new(state);
        *self.touched.lock().unwrap() = Instant::now();
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Classification {
    pub params: ClassifyParams,
    pub segmentation_ids: BTreeMap<String, String>,
    pub report: ThingReport,
    pub linkages: Vec<Linkage>,
    pub separated: Vec<Linkage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ThingState {
    pub thing_id: String,
    pub mesh_ids: Vec<String>,
    pub classification: Option<Classification>,
    /// Sorted by (mesh_id, segment).
    pub overrides: Vec<LabelOverride>,
}

impl ThingState {
    pub fn set_override(&mut self, o: LabelOverride) {
        match self
            .overrides
            .binary_search_by(|x| (x.mesh_id.as_str(), x.segment).cmp(&(o.mesh_id.as_str(), o.segment)))
        {
            Ok(i) => self.overrides[i] = o,
            Err(i) => self.overrides.insert(i, o),
        }
    }

    /// Classifier labels with separated linkages dropped, then overrides.
    pub fn effective_labels(&self) -> Vec<ComponentLabels> {
        let Some(c) = &self.classification else {
            return Vec::new();
        };
        let set = LinkageSet {
            alpha: c.report.linkages.alpha,
            mode: c.report.linkages.mode,
            pairs: c.linkages.clone(),
        };
        let mut labels = final_labels(&c.report.reports, &set);
        for o in &self.overrides {
            if let Some(l) = labels
                .iter_mut()
                .find(|l| l.mesh_id == o.mesh_id)
                .and_then(|l| l.labels.get_mut(o.segment))
            {
                *l = o.label;
            }
        }
        labels
    }

    pub fn view(&self, current: &BTreeMap<String, Option<String>>) -> ThingView {
        let stale = self
            .classification
            .as_ref()
            .is_some_and(|c| c.segmentation_ids.iter().any(|(m, s)| current.get(m) != Some(&Some(s.clone()))));
        ThingView {
            thing_id: self.thing_id.clone(),
            mesh_ids: self.mesh_ids.clone(),
            segmentation_ids: current.clone(),
            classification: self.classification.as_ref().map(|c| ClassificationView {
                params: c.params,
                segmentation_ids: c.segmentation_ids.clone(),
                reports: c.report.reports.clone(),
                linkages: c.linkages.clone(),
                separated: c.separated.clone(),
                classifier_labels: c.report.labels.clone(),
                warnings: c.report.warnings.clone(),
            }),
            overrides: self.overrides.clone(),
            effective_labels: self.effective_labels(),
            stale,
        }
    }
}

pub(crate) struct ThingSlot {
    pub op: Arc<tokio::sync::Mutex<()>>,
    pub state: Mutex<ThingState>,
    touched: Mutex<Instant>,
}

impl ThingSlot {
    pub fn touch(&self) {
        *self.touched.lock().unwrap() = Instant::now();
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshMeta {
    id: String,
    sha256: String,
    derived_from: Option<String>,
    processed: Option<ProcessInfo>,
    segmentation: Option<SegRecord>,
}

/// Write-through persistence: `meshes/<id>.obj` + `meshes/<id>.json`,
/// `things/<id>.json`.
struct Persist {
    dir: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl Persist {
    fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir.join("meshes"))?;
        fs::create_dir_all(dir.join("things"))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn save_mesh(&self, s: &MeshState, geometry_changed: bool) -> io::Result<()> {
        let base = self.dir.join("meshes");
        if geometry_changed {
            write_atomic(&base.join(format!("{}.obj", s.id)), write_obj(&s.mesh).as_bytes())?;
        }
        let meta = MeshMeta {
            id: s.id.clone(),
            sha256: s.sha256.clone(),
            derived_from: s.derived_from.clone(),
            processed: s.processed.clone(),
            segmentation: s.segmentation.as_deref().cloned(),
        };
        write_atomic(&base.join(format!("{}.json", s.id)), &serde_json::to_vec(&meta)?)
    }

    fn save_thing(&self, t: &ThingState) -> io::Result<()> {
        let path = self.dir.join("things").join(format!("{}.json", t.thing_id));
        write_atomic(&path, &serde_json::to_vec(t)?)
    }

    fn remove(&self, kind: &str, id: &str) {
        for ext in ["obj", "json"] {
            let _ = fs::remove_file(self.dir.join(kind).join(format!("{id}.{ext}")));
        }
    }

    fn load(&self) -> io::Result<(Vec<MeshState>, Vec<ThingState>)> {
        let bad = |p: &Path, e: &dyn std::fmt::Display| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", p.display()));
        let mut meshes = Vec::new();
        for entry in fs::read_dir(self.dir.join("meshes"))? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let meta: MeshMeta = serde_json::from_slice(&fs::read(&path)?).map_err(|e| bad(&path, &e))?;
            let obj_path = path.with_extension("obj");
            let obj = fs::read(&obj_path)?;
            let mesh = parse_obj(&obj).map_err(|e| bad(&obj_path, &e))?;
            meshes.push(MeshState {
                id: meta.id,
                sha256: meta.sha256,
                mesh: Arc::new(mesh),
                derived_from: meta.derived_from,
                processed: meta.processed,
                segmentation: meta.segmentation.map(Arc::new),
            });
        }
        let mut things = Vec::new();
        for entry in fs::read_dir(self.dir.join("things"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                things.push(serde_json::from_slice(&fs::read(&path)?).map_err(|e| bad(&path, &e))?);
            }
        }
        Ok((meshes, things))
    }
}

/// All session state. One session per service process.
pub(crate) struct Store {
    pub session_id: String,
    pub created_at: u64,
    meshes: RwLock<HashMap<String, Arc<MeshSlot>>>,
    things: RwLock<HashMap<String, Arc<ThingSlot>>>,
    /// Described components keyed by segmentation id.
    shapes: Mutex<HashMap<String, Arc<ComponentShape>>>,
    persist: Option<Persist>,
}

impl Store {
    pub fn open(dir: Option<&Path>) -> io::Result<Self> {
        let persist = dir.map(Persist::open).transpose()?;
        let store = Self {
            session_id: uuid::Uuid::new_v4().to_string(),
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            meshes: RwLock::default(),
            things: RwLock::default(),
            shapes: Mutex::default(),
            persist,
        };
        if let Some(p) = &store.persist {
            let (meshes, things) = p.load()?;
            for m in meshes {
                store.insert_slot(m);
            }
            for t in things {
                store.insert_thing_slot(t);
            }
        }
        Ok(store)
    }

    fn insert_slot(&self, state: MeshState) {
        let id = state.id.clone();
        let slot = MeshSlot {
            op: Arc::default(),
            state: RwLock::new(Arc::new(state)),
            touched: Mutex::new(Instant::now()),
        };
        self.meshes.write().unwrap().insert(id, Arc::new(slot));
    }

    fn insert_thing_slot(&self, state: ThingState) {
        let id = state.thing_id.clone();
        let slot = ThingSlot {
            op: Arc::default(),
            state: Mutex::new(state),
            touched: Mutex::new(Instant::now()),
        };
        self.things.write().unwrap().insert(id, Arc::new(slot));
    }

    pub fn mesh_count(&self) -> usize {
        self.meshes.read().unwrap().len()
    }

    pub fn thing_count(&self) -> usize {
        self.things.read().unwrap().len()
    }

    pub fn add_mesh(&self, state: MeshState) -> io::Result<()> {
        if let Some(p) = &self.persist {
            p.save_mesh(&state, true)?;
        }
        self.insert_slot(state);
        Ok(())
    }

    pub fn mesh(&self, id: &str) -> Option<Arc<MeshSlot>> {
        self.meshes.read().unwrap().get(id).cloned()
    }

    /// Swap in a new mesh state; a changed segmentation drops review
    /// overrides on this mesh in every thing that contains it.
    pub fn update_mesh(&self, slot: &MeshSlot, state: MeshState, geometry_changed: bool) -> io::Result<()> {
        let old = slot.snapshot();
        let seg_changed = old.segmentation.as_ref().map(|s| &s.segmentation_id)
            != state.segmentation.as_ref().map(|s| &s.segmentation_id);
        if let Some(p) = &self.persist {
            p.save_mesh(&state, geometry_changed)?;
        }
        let id = state.id.clone();
        slot.replace(state);
        if seg_changed {
            if let Some(old_seg) = &old.segmentation {
                self.shapes.lock().unwrap().remove(&old_seg.segmentation_id);
            }
            for thing in self.things_containing(&id) {
                let mut t = thing.state.lock().unwrap();
                let before = t.overrides.len();
                t.overrides.retain(|o| o.mesh_id != id);
                if t.overrides.len() != before {
                    self.save_thing(&t)?;
                }
            }
        }
        Ok(())
    }

    pub fn things_containing(&self, mesh_id: &str) -> Vec<Arc<ThingSlot>> {
        let mut out: Vec<(String, Arc<ThingSlot>)> = self
            .things
            .read()
            .unwrap()
            .iter()
            .filter(|(_, t)| t.state.lock().unwrap().mesh_ids.iter().any(|m| m == mesh_id))
            .map(|(id, t)| (id.clone(), t.clone()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.into_iter().map(|(_, t)| t).collect()
    }

    pub fn add_thing(&self, state: ThingState) -> io::Result<()> {
        self.save_thing(&state)?;
        self.insert_thing_slot(state);
        Ok(())
    }

    pub fn thing(&self, id: &str) -> Option<Arc<ThingSlot>> {
        let slot = self.things.read().unwrap().get(id).cloned()?;
        slot.touch();
        let mesh_ids = slot.state.lock().unwrap().mesh_ids.clone();
        for m in mesh_ids {
            if let Some(mesh) = self.mesh(&m) {
                *mesh.touched.lock().unwrap() = Instant::now();
            }
        }
        Some(slot)
    }

    pub fn save_thing(&self, state: &ThingState) -> io::Result<()> {
        match &self.persist {
            Some(p) => p.save_thing(state),
            None => Ok(()),
        }
    }

    /// Current segmentation id of each mesh, `None` when unsegmented or gone.
    pub fn segmentation_ids(&self, mesh_ids: &[String]) -> BTreeMap<String, Option<String>> {
        mesh_ids
            .iter()
            .map(|m| {
                let id = self
                    .mesh(m)
                    .and_then(|s| s.snapshot().segmentation.as_ref().map(|r| r.segmentation_id.clone()));
                (m.clone(), id)
            })
            .collect()
    }

    pub fn thing_view(&self, state: &ThingState) -> ThingView {
        state.view(&self.segmentation_ids(&state.mesh_ids))
    }

    pub fn cached_shape(&self, segmentation_id: &str) -> Option<Arc<ComponentShape>> {
        self.shapes.lock().unwrap().get(segmentation_id).cloned()
    }

    pub fn cache_shape(&self, segmentation_id: &str, shape: Arc<ComponentShape>) {
        self.shapes.lock().unwrap().insert(segmentation_id.to_string(), shape);
    }

    /// Drop meshes and things idle for longer than `ttl`, skipping any with
    /// an operation in flight. A thing goes with any of its meshes.
    pub fn expire_idle(&self, ttl: Duration) -> (usize, usize) {
        let now = Instant::now();
        let idle = |t: &Mutex<Instant>| now.duration_since(*t.lock().unwrap()) > ttl;
        let mut gone_meshes = Vec::new();
        {
            let mut meshes = self.meshes.write().unwrap();
            meshes.retain(|id, slot| {
                let keep = !idle(&slot.touched) || slot.op.try_lock().is_err();
                if !keep {
                    gone_meshes.push((id.clone(), slot.state.read().unwrap().segmentation.clone()));
                }
                keep
            });
        }
        let mut gone_things = 0;
        {
            let mut things = self.things.write().unwrap();
            things.retain(|id, slot| {
                let orphaned = {
                    let t = slot.state.lock().unwrap();
                    t.mesh_ids.iter().any(|m| gone_meshes.iter().any(|(g, _)| g == m))
                };
                let keep = !orphaned && (!idle(&slot.touched) || slot.op.try_lock().is_err());
                if !keep {
                    gone_things += 1;
                    if let Some(p) = &self.persist {
                        p.remove("things", id);
                    }
                }
                keep
            });
        }
        let mut shapes = self.shapes.lock().unwrap();
        for (id, seg) in &gone_meshes {
            if let Some(s) = seg {
                shapes.remove(&s.segmentation_id);
            }
            if let Some(p) = &self.persist {
                p.remove("meshes", id);
            }
        }
        (gone_meshes.len(), gone_things)
    }
}

pub(crate) fn segmentation_id(mesh_sha256: &str, k: Option<usize>, params: &fabseg_core::spectral::SegmentParams) -> String {
    let key = format!("{mesh_sha256}|{k:?}|{}", serde_json::to_string(params).unwrap_or_default());
    format!("s{}", &sha256_hex(key.as_bytes())[..16])
}
