use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use fabseg_core::classify::{classify_thing, describe_component, ClassifyParams, ThingComponent};
use fabseg_core::mesh::{parse_mesh, remesh, write_obj, RemeshParams};
use fabseg_core::spectral::segment;
use fabseg_core::stylize::{apply_style, build_mask, provenance};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::api::*;
use crate::error::ApiError;
use crate::jobs::run_long;
use crate::store::{new_id, segmentation_id, Classification, MeshSlot, MeshState, SegRecord, ThingSlot, ThingState};
use crate::AppState;

type ApiResult = Result<Response, ApiError>;

/// Empty bodies mean "all defaults".
fn parse_body<T: DeserializeOwned + Default>(body: &[u8]) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("request body: {e}")))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, ApiError> {
    serde_json::to_value(v).map_err(ApiError::internal)
}

fn mesh_slot(state: &AppState, id: &str) -> Result<Arc<MeshSlot>, ApiError> {
    state.inner.store.mesh(id).ok_or_else(|| ApiError::not_found(format_args!("mesh {id:?}")))
}

fn thing_slot(state: &AppState, id: &str) -> Result<Arc<ThingSlot>, ApiError> {
    state.inner.store.thing(id).ok_or_else(|| ApiError::not_found(format_args!("thing {id:?}")))
}

pub async fn session(State(state): State<AppState>) -> Json<SessionView> {
    let store = &state.inner.store;
    Json(SessionView {
        session_id: store.session_id.clone(),
        created_at: store.created_at,
        meshes: store.mesh_count(),
        things: store.thing_count(),
        corpus_entries: state.inner.config.corpus.as_ref().map(|c| c.len()),
    })
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("route")
}

pub async fn upload(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult {
    if body.is_empty() {
        return Err(ApiError::invalid("empty mesh upload"));
    }
    let id = new_id('m');
    let name = query.get("name").cloned().unwrap_or_else(|| id.clone());
    let mesh = parse_mesh(&body, None, &name)?;
    let mut record = MeshState::new(id, &mesh, None)?;
    // Keep the client's name; the id only names files.
    record.mesh = Arc::new((*record.mesh).clone().with_name(name));
    let info = record.info();
    state.inner.store.add_mesh(record).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

pub async fn get_mesh(State(state): State<AppState>, Path(file): Path<String>) -> ApiResult {
    if let Some(id) = file.strip_suffix(".obj") {
        let snap = mesh_slot(&state, id)?.snapshot();
        let obj = write_obj(&snap.mesh);
        return Ok(([(header::CONTENT_TYPE, "model/obj")], obj).into_response());
    }
    Ok(Json(mesh_slot(&state, &file)?.snapshot().info()).into_response())
}

pub async fn get_segmentation(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let snap = mesh_slot(&state, &id)?.snapshot();
    let seg = snap
        .segment_response()
        .ok_or_else(|| ApiError::not_found(format_args!("segmentation of mesh {id:?}")))?;
    Ok(Json(seg).into_response())
}

pub async fn process(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: ProcessRequest = parse_body(&body)?;
    let slot = mesh_slot(&state, &id)?;
    let mut params = RemeshParams::with_target(req.target_resolution.unwrap_or(state.inner.config.default_resolution));
    if let Some(t) = req.tolerance_fraction {
        params.tolerance_fraction = t;
    }
    params.validate()?;
    let inner = state.inner.clone();
    let lock = slot.op.clone();
    run_long(&state, "process", Some(lock), move || {
        let snap = slot.snapshot();
        let out = remesh(&snap.mesh, &params)?;
        let mut next = MeshState::new(snap.id.clone(), &out, snap.derived_from.clone())?;
        next.mesh = Arc::new((*next.mesh).clone().with_name(snap.mesh.name()));
        let info = ProcessInfo {
            mesh_id: snap.id.clone(),
            target_resolution: params.target_resolution,
            original_face_count: snap.mesh.face_count(),
            face_count: next.mesh.face_count(),
            vertex_count: next.mesh.vertex_count(),
        };
        next.processed = Some(info.clone());
        inner.store.update_mesh(&slot, next, true).map_err(ApiError::internal)?;
        to_value(&info)
    })
    .await
}

pub async fn segment_mesh(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: SegmentRequest = parse_body(&body)?;
    let slot = mesh_slot(&state, &id)?;
    let mut params = state.inner.config.segment;
    if let Some(seed) = req.seed {
        params.seed = seed;
    }
    params.validate()?;
    let faces = slot.snapshot().mesh.face_count();
    if let Some(k) = req.k {
        if k == 0 || k > faces {
            return Err(ApiError::invalid(format!("k = {k} must lie in 1..={faces}")));
        }
    }
    let inner = state.inner.clone();
    let lock = slot.op.clone();
    run_long(&state, "segment", Some(lock), move || {
        let snap = slot.snapshot();
        let seg_id = segmentation_id(&snap.sha256, req.k, &params);
        if snap.segmentation.as_ref().is_some_and(|s| s.segmentation_id == seg_id) {
            return to_value(&snap.segment_response());
        }
        let result = segment(&snap.mesh, req.k, &params)?;
        let mut next = (*snap).clone();
        next.segmentation = Some(Arc::new(SegRecord {
            segmentation_id: seg_id,
            result,
        }));
        let body = next.segment_response();
        inner.store.update_mesh(&slot, next, false).map_err(ApiError::internal)?;
        to_value(&body)
    })
    .await
}

pub async fn create_thing(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateThing = parse_body(&body)?;
    if req.mesh_ids.is_empty() {
        return Err(ApiError::invalid("a thing needs at least one mesh"));
    }
    let mut seen = HashSet::new();
    for m in &req.mesh_ids {
        if !seen.insert(m) {
            return Err(ApiError::invalid(format!("mesh {m:?} listed twice")));
        }
        mesh_slot(&state, m)?;
    }
    let thing = ThingState {
        thing_id: new_id('t'),
        mesh_ids: req.mesh_ids.clone(),
        classification: None,
        overrides: Vec::new(),
    };
    let created = ThingCreated {
        thing_id: thing.thing_id.clone(),
        mesh_ids: req.mesh_ids,
    };
    state.inner.store.add_thing(thing).map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

pub async fn classify(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: ClassifyRequest = parse_body(&body)?;
    let thing = thing_slot(&state, &id)?;
    let index = state
        .inner
        .config
        .corpus
        .clone()
        .ok_or_else(|| ApiError::conflict("service has no corpus index loaded"))?;
    let defaults = ClassifyParams::default();
    let params = ClassifyParams {
        alpha: req.alpha.unwrap_or(defaults.alpha),
        n_meshes: req.n_meshes.unwrap_or(defaults.n_meshes),
        n_segments: req.n_segments.unwrap_or(defaults.n_segments),
        linkage: req.linkage.unwrap_or(defaults.linkage),
    };
    params.validate()?;
    let inner = state.inner.clone();
    let lock = thing.op.clone();
    run_long(&state, "classify", Some(lock), move || {
        let mesh_ids = thing.state.lock().unwrap().mesh_ids.clone();
        let mut shapes = Vec::with_capacity(mesh_ids.len());
        let mut seg_ids = BTreeMap::new();
        for m in &mesh_ids {
            let snap = inner
                .store
                .mesh(m)
                .ok_or_else(|| ApiError::conflict(format!("mesh {m:?} of this thing has expired")))?
                .snapshot();
            let seg = snap
                .segmentation
                .clone()
                .ok_or_else(|| ApiError::conflict(format!("mesh {m:?} is not segmented")))?;
            let shape = match inner.store.cached_shape(&seg.segmentation_id) {
                Some(s) => s,
                None => {
                    let s = Arc::new(describe_component(&snap.mesh, &seg.result, &index.params)?);
                    inner.store.cache_shape(&seg.segmentation_id, s.clone());
                    s
                }
            };
            seg_ids.insert(m.clone(), seg.segmentation_id.clone());
            shapes.push(shape);
        }
        let components: Vec<ThingComponent<'_>> = mesh_ids
            .iter()
            .zip(&shapes)
            .map(|(m, s)| ThingComponent { mesh_id: m, shape: s })
            .collect();
        let report = classify_thing(&components, &index, &params)?;
        let mut t = thing.state.lock().unwrap();
        t.classification = Some(Classification {
            params,
            segmentation_ids: seg_ids,
            linkages: report.linkages.pairs.clone(),
            separated: Vec::new(),
            report,
        });
        inner.store.save_thing(&t).map_err(ApiError::internal)?;
        let view = inner.store.thing_view(&t);
        to_value(&view)
    })
    .await
}

pub async fn report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let thing = thing_slot(&state, &id)?;
    let t = thing.state.lock().unwrap().clone();
    Ok(Json(state.inner.store.thing_view(&t)).into_response())
}

pub async fn patch_label(
    State(state): State<AppState>,
    Path((id, mesh_id, seg)): Path<(String, String, String)>,
    body: Bytes,
) -> ApiResult {
    let thing = thing_slot(&state, &id)?;
    let PatchLabel { label } = serde_json::from_slice(&body).map_err(|e| ApiError::invalid(format!("request body: {e}")))?;
    let segment: usize = seg.parse().map_err(|_| ApiError::not_found(format_args!("segment {seg:?}")))?;
    let _op = thing.op.clone().lock_owned().await;
    let mut t = thing.state.lock().unwrap().clone();
    if !t.mesh_ids.contains(&mesh_id) {
        return Err(ApiError::not_found(format_args!("mesh {mesh_id:?} in thing {id:?}")));
    }
    let snap = mesh_slot(&state, &mesh_id)?.snapshot();
    let k = snap
        .segmentation
        .as_ref()
        .map(|s| s.result.k)
        .ok_or_else(|| ApiError::conflict(format!("mesh {mesh_id:?} is not segmented")))?;
    if segment >= k {
        return Err(ApiError::not_found(format_args!("segment {segment} of mesh {mesh_id:?} (k = {k})")));
    }
    t.set_override(LabelOverride { mesh_id, segment, label });
    state.inner.store.save_thing(&t).map_err(ApiError::internal)?;
    let view = state.inner.store.thing_view(&t);
    *thing.state.lock().unwrap() = t;
    Ok(Json(view).into_response())
}

pub async fn separate(State(state): State<AppState>, Path((id, n)): Path<(String, String)>) -> ApiResult {
    let thing = thing_slot(&state, &id)?;
    let _op = thing.op.clone().lock_owned().await;
    let mut t = thing.state.lock().unwrap().clone();
    let c = t
        .classification
        .as_mut()
        .ok_or_else(|| ApiError::conflict(format!("thing {id:?} has not been classified")))?;
    let n: usize = n
        .parse()
        .ok()
        .filter(|&n| n < c.linkages.len())
        .ok_or_else(|| ApiError::not_found(format_args!("linkage {n:?}")))?;
    let removed = c.linkages.remove(n);
    c.separated.push(removed);
    state.inner.store.save_thing(&t).map_err(ApiError::internal)?;
    let view = state.inner.store.thing_view(&t);
    *thing.state.lock().unwrap() = t;
    Ok(Json(view).into_response())
}

pub async fn stylize(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let req: StyleRequest = parse_body(&body)?;
    let slot = mesh_slot(&state, &id)?;
    let store = &state.inner.store;
    let candidates: Vec<Arc<ThingSlot>> = match &req.thing_id {
        Some(t) => {
            let thing = thing_slot(&state, t)?;
            if !thing.state.lock().unwrap().mesh_ids.contains(&id) {
                return Err(ApiError::invalid(format!("mesh {id:?} is not part of thing {t:?}")));
            }
            vec![thing]
        }
        None => store
            .things_containing(&id)
            .into_iter()
            .filter(|t| t.state.lock().unwrap().classification.is_some())
            .collect(),
    };
    let thing = match candidates.as_slice() {
        [] => return Err(ApiError::conflict(format!("mesh {id:?} has not been classified"))),
        [one] => one.state.lock().unwrap().clone(),
        _ => return Err(ApiError::invalid("mesh belongs to several classified things; pass thing_id")),
    };
    let view = store.thing_view(&thing);
    if view.classification.is_none() {
        return Err(ApiError::conflict(format!("thing {:?} has not been classified", thing.thing_id)));
    }
    if view.stale {
        return Err(ApiError::conflict("a mesh was re-segmented after classification; classify again"));
    }
    let labels = view
        .effective_labels
        .iter()
        .find(|c| c.mesh_id == id)
        .map(|c| c.labels.clone())
        .ok_or_else(|| ApiError::internal(format!("no labels for mesh {id} in thing {}", thing.thing_id)))?;
    let inner = state.inner.clone();
    let lock = slot.op.clone();
    let thing_id = thing.thing_id.clone();
    run_long(&state, "stylize", Some(lock), move || {
        let snap = slot.snapshot();
        let seg = snap
            .segmentation
            .as_ref()
            .ok_or_else(|| ApiError::conflict(format!("mesh {:?} is not segmented", snap.id)))?;
        let mask = build_mask(&snap.mesh, &seg.result, &labels)?;
        let styled = apply_style(&snap.mesh, &mask, &req.spec)?;
        let new_mesh_id = new_id('m');
        let record = MeshState::new(new_mesh_id.clone(), &styled.with_name(format!("{}-styled", snap.mesh.name())), Some(snap.id.clone()))?;
        let prov = provenance(&snap.mesh, &record.mesh, &mask, &req.spec);
        let out = Stylized {
            mesh_id: new_mesh_id,
            source_mesh_id: snap.id.clone(),
            thing_id,
            masked_vertices: mask.masked_count(),
            labels,
            provenance: prov,
        };
        inner.store.add_mesh(record).map_err(ApiError::internal)?;
        to_value(&out)
    })
    .await
}

pub async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let view = state
        .inner
        .jobs
        .view(&id)
        .ok_or_else(|| ApiError::not_found(format_args!("job {id:?}")))?;
    Ok(Json(view).into_response())
}
