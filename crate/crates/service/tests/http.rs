use std::collections::HashSet;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use fabseg_core::corpus::synthetic::{snap_fit, starter_set, SnapFit, SyntheticModel};
use fabseg_core::corpus::{build_index, CorpusIndex};
use fabseg_core::labels::FunctionalityLabel;
use fabseg_core::mesh::{parse_obj, write_obj};
use fabseg_core::shape::ShapeParams;
use fabseg_service::api::*;
use fabseg_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn corpus() -> Arc<CorpusIndex> {
    static INDEX: OnceLock<Arc<CorpusIndex>> = OnceLock::new();
    INDEX
        .get_or_init(|| {
            let entries: Vec<_> = starter_set()
                .iter()
                .filter(|m| m.group != "snap-jar")
                .map(SyntheticModel::to_entry)
                .collect();
            Arc::new(build_index(&entries, &ShapeParams::default(), None).unwrap().0)
        })
        .clone()
}

fn config() -> ServiceConfig {
    ServiceConfig {
        corpus: Some(corpus()),
        ..ServiceConfig::default()
    }
}

struct Client {
    app: Router,
}

impl Client {
    fn new(config: ServiceConfig) -> Self {
        Self {
            app: router(AppState::new(config).unwrap()),
        }
    }

    async fn raw(&self, method: Method, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let bytes = body.map(|b| serde_json::to_vec(&b).unwrap()).unwrap_or_default();
        let (status, out) = self.raw(method, uri, bytes).await;
        (status, serde_json::from_slice(&out).unwrap_or(Value::Null))
    }

    /// Expect `status` and a body of type `T`.
    async fn call<T: DeserializeOwned>(&self, method: Method, uri: &str, body: Option<Value>, status: StatusCode) -> T {
        let (got, v) = self.json(method, uri, body).await;
        assert_eq!(got, status, "{uri}: {v}");
        serde_json::from_value(v.clone()).unwrap_or_else(|e| panic!("{uri}: {e}: {v}"))
    }

    async fn error(&self, method: Method, uri: &str, body: Option<Value>, status: StatusCode) -> ErrorBody {
        self.call::<ErrorEnvelope>(method, uri, body, status).await.error
    }

    async fn upload(&self, model: &SyntheticModel) -> MeshInfo {
        let (status, body) = self
            .raw(Method::POST, &format!("/meshes?name={}", model.thing_id), write_obj(&model.mesh).into_bytes())
            .await;
        assert_eq!(status, StatusCode::CREATED);
        serde_json::from_slice(&body).unwrap()
    }

    async fn download(&self, id: &str) -> fabseg_core::mesh::TriangleMesh {
        let (status, body) = self.raw(Method::GET, &format!("/meshes/{id}.obj"), Vec::new()).await;
        assert_eq!(status, StatusCode::OK);
        parse_obj(&body).unwrap()
    }
}

fn masked_vertices(faces: &[[u32; 3]], face_labels: &[u32], functional: &[bool], n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for (f, tri) in faces.iter().enumerate() {
        if functional[face_labels[f] as usize] {
            for &v in tri {
                mask[v as usize] = true;
            }
        }
    }
    mask
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_review_session() {
    let c = Client::new(config());
    let (lid, base) = snap_fit("jar", SnapFit::default());

    // Upload.
    let lid_info = c.upload(&lid).await;
    let base_info = c.upload(&base).await;
    assert_eq!(lid_info.face_count, lid.mesh.face_count());
    assert_eq!(lid_info.name, "jar-lid");

    // Process: remesh to a uniform resolution.
    let target = 2500;
    let processed: ProcessInfo = c
        .call(Method::POST, &format!("/meshes/{}/process", lid_info.mesh_id), Some(json!({"target_resolution": target})), StatusCode::OK)
        .await;
    assert_eq!(processed.original_face_count, lid.mesh.face_count());
    assert!(processed.face_count.abs_diff(target) <= target / 50, "{processed:?}");
    c.call::<ProcessInfo>(Method::POST, &format!("/meshes/{}/process", base_info.mesh_id), Some(json!({"target_resolution": target})), StatusCode::OK)
        .await;

    // Segment; repeating is idempotent.
    let seg_uri = |m: &str| format!("/meshes/{m}/segment");
    let lid_seg: SegmentResponse = c.call(Method::POST, &seg_uri(&lid_info.mesh_id), Some(json!({"k": 3})), StatusCode::OK).await;
    assert_eq!(lid_seg.segmentation.face_labels.len(), processed.face_count);
    assert_eq!(lid_seg.segmentation.k, 3);
    let again: Value = c.call(Method::POST, &seg_uri(&lid_info.mesh_id), Some(json!({"k": 3})), StatusCode::OK).await;
    assert_eq!(again, serde_json::to_value(&lid_seg).unwrap());
    let stored: SegmentResponse = c
        .call(Method::GET, &format!("/meshes/{}/segmentation", lid_info.mesh_id), None, StatusCode::OK)
        .await;
    assert_eq!(stored, lid_seg);
    let base_seg: SegmentResponse = c.call(Method::POST, &seg_uri(&base_info.mesh_id), None, StatusCode::OK).await;
    assert!(base_seg.segmentation.k >= 1);

    // Group and classify.
    let thing: ThingCreated = c
        .call(Method::POST, "/things", Some(json!({"mesh_ids": [lid_info.mesh_id, base_info.mesh_id]})), StatusCode::CREATED)
        .await;
    let view: ThingView = c.call(Method::POST, &format!("/things/{}/classify", thing.thing_id), Some(json!({})), StatusCode::OK).await;
    let cls = view.classification.as_ref().unwrap();
    assert_eq!(cls.reports.len(), 2);
    assert_eq!(cls.params.alpha, 0.86);
    for r in &cls.reports {
        for s in &r.segments {
            assert_eq!(s.vote_detail.len(), 5);
        }
    }
    assert_eq!(view.effective_labels.len(), 2);
    assert!(!view.stale);
    let report: ThingView = c.call(Method::GET, &format!("/things/{}/report", thing.thing_id), None, StatusCode::OK).await;
    assert_eq!(report, view);

    // Overrides decide the mask: everything aesthetic, then segment 0 functional.
    let patch = |seg: usize, label: &str| {
        (
            format!("/things/{}/segments/{}/{seg}", thing.thing_id, lid_info.mesh_id),
            json!({ "label": label }),
        )
    };
    for s in 0..3 {
        let (uri, body) = patch(s, "aesthetic");
        let v: ThingView = c.call(Method::PATCH, &uri, Some(body), StatusCode::OK).await;
        assert_eq!(v.overrides.len(), s + 1);
    }
    let (uri, body) = patch(0, "functional_external");
    let v: ThingView = c.call(Method::PATCH, &uri, Some(body), StatusCode::OK).await;
    let lid_labels = &v.effective_labels.iter().find(|l| l.mesh_id == lid_info.mesh_id).unwrap().labels;
    assert_eq!(lid_labels, &[FunctionalityLabel::FunctionalExternal, FunctionalityLabel::Aesthetic, FunctionalityLabel::Aesthetic]);

    let styled: Stylized = c
        .call(Method::POST, &format!("/meshes/{}/stylize", lid_info.mesh_id), Some(json!({"amplitude": 0.8, "seed": 3})), StatusCode::OK)
        .await;
    assert_eq!(styled.source_mesh_id, lid_info.mesh_id);
    assert_eq!(styled.labels, *lid_labels);

    // Export both and check the mask contract through the wire format.
    let original = c.download(&lid_info.mesh_id).await;
    let out = c.download(&styled.mesh_id).await;
    assert_eq!(out.faces(), original.faces());
    assert!(out.colors().is_some());
    let mask = masked_vertices(original.faces(), &lid_seg.segmentation.face_labels, &[true, false, false], original.vertex_count());
    assert_eq!(mask.iter().filter(|&&m| m).count(), styled.masked_vertices);
    assert!(styled.masked_vertices > 0);
    let mut moved = 0;
    for (i, (a, b)) in out.vertices().iter().zip(original.vertices()).enumerate() {
        if mask[i] {
            assert_eq!(a, b, "masked vertex {i} moved");
        } else {
            assert!((a - b).norm() <= 0.8 + 1e-6);
            moved += usize::from(a != b);
        }
    }
    assert!(moved > 0);
    let info: MeshInfo = c.call(Method::GET, &format!("/meshes/{}", styled.mesh_id), None, StatusCode::OK).await;
    assert_eq!(info.derived_from.as_deref(), Some(lid_info.mesh_id.as_str()));

    // Separate: remove a linkage if any, otherwise the index is unknown.
    let n_links = view.classification.as_ref().unwrap().linkages.len();
    let sep = format!("/things/{}/linkages/0", thing.thing_id);
    if n_links > 0 {
        let v: ThingView = c.call(Method::DELETE, &sep, None, StatusCode::OK).await;
        assert_eq!(v.classification.unwrap().separated.len(), 1);
    } else {
        c.error(Method::DELETE, &sep, None, StatusCode::NOT_FOUND).await;
    }

    // Re-segmenting drops that mesh's overrides and marks the report stale.
    c.call::<SegmentResponse>(Method::POST, &seg_uri(&lid_info.mesh_id), Some(json!({"k": 2})), StatusCode::OK).await;
    let v: ThingView = c.call(Method::GET, &format!("/things/{}/report", thing.thing_id), None, StatusCode::OK).await;
    assert!(v.stale);
    assert!(v.overrides.is_empty());
    c.error(Method::POST, &format!("/meshes/{}/stylize", lid_info.mesh_id), Some(json!({})), StatusCode::CONFLICT).await;
}

#[tokio::test]
async fn error_statuses() {
    let c = Client::new(config());
    let (lid, base) = snap_fit("e", SnapFit::default());

    let e = c.error(Method::GET, "/meshes/nope", None, StatusCode::NOT_FOUND).await;
    assert_eq!(e.code, "not_found");
    c.error(Method::GET, "/meshes/nope.obj", None, StatusCode::NOT_FOUND).await;
    c.error(Method::POST, "/meshes/nope/segment", None, StatusCode::NOT_FOUND).await;
    c.error(Method::GET, "/jobs/nope", None, StatusCode::NOT_FOUND).await;
    c.error(Method::GET, "/no/such/route", None, StatusCode::NOT_FOUND).await;

    let (status, body) = c.raw(Method::POST, "/meshes", b"v 0 0 0\nf 1 2 9\n".to_vec()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{}", String::from_utf8_lossy(&body));
    let (status, _) = c.raw(Method::POST, "/meshes", Vec::new()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let a = c.upload(&lid).await;
    let b = c.upload(&base).await;
    c.error(Method::POST, &format!("/meshes/{}/segment", a.mesh_id), Some(json!({"k": 0})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::POST, &format!("/meshes/{}/segment", a.mesh_id), Some(json!({"bogus": 1})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::POST, &format!("/meshes/{}/process", a.mesh_id), Some(json!({"target_resolution": 2})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::POST, "/things", Some(json!({"mesh_ids": []})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::POST, "/things", Some(json!({"mesh_ids": [a.mesh_id, a.mesh_id]})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::POST, "/things", Some(json!({"mesh_ids": ["ghost"]})), StatusCode::NOT_FOUND).await;

    let thing: ThingCreated = c
        .call(Method::POST, "/things", Some(json!({"mesh_ids": [a.mesh_id, b.mesh_id]})), StatusCode::CREATED)
        .await;
    let t = &thing.thing_id;
    // Stylize before classify.
    let e = c.error(Method::POST, &format!("/meshes/{}/stylize", a.mesh_id), Some(json!({})), StatusCode::CONFLICT).await;
    assert_eq!(e.code, "conflict");
    // Classify needs segmentations.
    c.error(Method::POST, &format!("/things/{t}/classify"), None, StatusCode::CONFLICT).await;
    c.error(Method::POST, &format!("/things/{t}/classify"), Some(json!({"alpha": 1.5})), StatusCode::UNPROCESSABLE_ENTITY).await;
    c.error(Method::DELETE, &format!("/things/{t}/linkages/0"), None, StatusCode::CONFLICT).await;
    c.error(Method::PATCH, &format!("/things/{t}/segments/{}/0", a.mesh_id), Some(json!({"label": "aesthetic"})), StatusCode::CONFLICT).await;

    for m in [&a.mesh_id, &b.mesh_id] {
        c.call::<SegmentResponse>(Method::POST, &format!("/meshes/{m}/segment"), Some(json!({"k": 2})), StatusCode::OK).await;
    }
    c.error(Method::PATCH, &format!("/things/{t}/segments/{}/7", a.mesh_id), Some(json!({"label": "aesthetic"})), StatusCode::NOT_FOUND).await;
    c.error(Method::PATCH, &format!("/things/{t}/segments/{}/x", a.mesh_id), Some(json!({"label": "aesthetic"})), StatusCode::NOT_FOUND).await;
    c.error(Method::PATCH, &format!("/things/{t}/segments/ghost/0"), Some(json!({"label": "aesthetic"})), StatusCode::NOT_FOUND).await;
    c.error(Method::PATCH, &format!("/things/{t}/segments/{}/0", a.mesh_id), Some(json!({"label": "decorative"})), StatusCode::UNPROCESSABLE_ENTITY).await;

    c.call::<ThingView>(Method::POST, &format!("/things/{t}/classify"), Some(json!({"alpha": 0.9})), StatusCode::OK).await;
    c.error(Method::DELETE, &format!("/things/{t}/linkages/99"), None, StatusCode::NOT_FOUND).await;
    let e = c
        .error(Method::POST, &format!("/meshes/{}/stylize", a.mesh_id), Some(json!({"amplitude": 1000.0})), StatusCode::UNPROCESSABLE_ENTITY)
        .await;
    assert!(e.message.contains("amplitude"), "{e:?}");

    // No corpus loaded.
    let bare = Client::new(ServiceConfig::default());
    let m = bare.upload(&lid).await;
    let t: ThingCreated = bare.call(Method::POST, "/things", Some(json!({"mesh_ids": [m.mesh_id]})), StatusCode::CREATED).await;
    bare.error(Method::POST, &format!("/things/{}/classify", t.thing_id), None, StatusCode::CONFLICT).await;
}

#[tokio::test]
async fn internal_errors_carry_an_incident_id() {
    let dir = tempfile::tempdir().unwrap();
    let c = Client::new(ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    });
    // Write-through fails once the directory is gone.
    std::fs::remove_dir_all(dir.path()).unwrap();
    let (lid, _) = snap_fit("x", SnapFit::default());
    let (status, body) = c.raw(Method::POST, "/meshes", write_obj(&lid.mesh).into_bytes()).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    let e: ErrorEnvelope = serde_json::from_slice(&body).unwrap();
    assert_eq!(e.error.code, "internal");
    assert_eq!(e.error.message, "internal error");
    assert!(e.error.incident_id.is_some_and(|id| uuid_like(&id)));
}

fn uuid_like(s: &str) -> bool {
    s.len() == 36 && s.chars().filter(|&c| c == '-').count() == 4
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn long_operations_become_jobs() {
    let c = Client::new(ServiceConfig {
        long_operation: Duration::ZERO,
        ..config()
    });
    let (lid, _) = snap_fit("j", SnapFit::default());
    let m = c.upload(&lid).await;
    let accepted: JobAccepted = c
        .call(Method::POST, &format!("/meshes/{}/segment", m.mesh_id), Some(json!({"k": 2})), StatusCode::ACCEPTED)
        .await;
    assert_eq!(accepted.poll, format!("/jobs/{}", accepted.job_id));
    let job = loop {
        let job: JobView = c.call(Method::GET, &accepted.poll, None, StatusCode::OK).await;
        if job.status != JobStatus::Running {
            break job;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    assert_eq!(job.status, JobStatus::Succeeded);
    assert_eq!(job.kind, "segment");
    let seg: SegmentResponse = serde_json::from_value(job.result.unwrap()).unwrap();
    assert_eq!(seg.segmentation.face_labels.len(), m.face_count);
    let stored: SegmentResponse = c.call(Method::GET, &format!("/meshes/{}/segmentation", m.mesh_id), None, StatusCode::OK).await;
    assert_eq!(stored, seg);

    // Failures surface through the job too.
    let unsegmented = c.upload(&lid).await;
    let t: ThingCreated = c
        .call(Method::POST, "/things", Some(json!({"mesh_ids": [unsegmented.mesh_id]})), StatusCode::CREATED)
        .await;
    // A zero window may still catch an instant failure synchronously.
    let (status, v) = c.json(Method::POST, &format!("/things/{}/classify", t.thing_id), None).await;
    let error = if status == StatusCode::ACCEPTED {
        let accepted: JobAccepted = serde_json::from_value(v).unwrap();
        let job = loop {
            let job: JobView = c.call(Method::GET, &accepted.poll, None, StatusCode::OK).await;
            if job.status != JobStatus::Running {
                break job;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        };
        assert_eq!(job.status, JobStatus::Failed);
        assert_eq!(job.http_status, Some(409));
        job.error.unwrap()
    } else {
        assert_eq!(status, StatusCode::CONFLICT);
        serde_json::from_value::<ErrorEnvelope>(v).unwrap().error
    };
    assert_eq!(error.code, "conflict");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn distinct_meshes_segment_concurrently() {
    let c = Arc::new(Client::new(config()));
    let (lid, base) = snap_fit("c", SnapFit::default());
    let a = c.upload(&lid).await;
    let b = c.upload(&base).await;
    let run = |id: String| {
        let c = c.clone();
        tokio::spawn(async move {
            c.call::<SegmentResponse>(Method::POST, &format!("/meshes/{id}/segment"), Some(json!({"k": 2})), StatusCode::OK)
                .await
        })
    };
    let (ra, rb) = tokio::join!(run(a.mesh_id.clone()), run(b.mesh_id.clone()));
    assert_eq!(ra.unwrap().mesh_id, a.mesh_id);
    assert_eq!(rb.unwrap().mesh_id, b.mesh_id);

    // Same mesh, different k, queued: both complete and the later one wins.
    let seg = |k: usize| {
        let c = c.clone();
        let id = a.mesh_id.clone();
        tokio::spawn(async move {
            c.call::<SegmentResponse>(Method::POST, &format!("/meshes/{id}/segment"), Some(json!({ "k": k })), StatusCode::OK)
                .await
        })
    };
    let (r3, r4) = tokio::join!(seg(3), seg(4));
    let ids: HashSet<_> = [r3.unwrap().segmentation_id, r4.unwrap().segmentation_id].into_iter().collect();
    let last: SegmentResponse = c.call(Method::GET, &format!("/meshes/{}/segmentation", a.mesh_id), None, StatusCode::OK).await;
    assert!(ids.contains(&last.segmentation_id));
    assert_eq!(last.segmentation.face_labels.len(), a.face_count);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn persisted_session_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = || ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..config()
    };
    let (lid, base) = snap_fit("p", SnapFit::default());
    let (thing_id, a, seg, view) = {
        let c = Client::new(cfg());
        let a = c.upload(&lid).await;
        let b = c.upload(&base).await;
        let seg: SegmentResponse = c.call(Method::POST, &format!("/meshes/{}/segment", a.mesh_id), Some(json!({"k": 2})), StatusCode::OK).await;
        c.call::<SegmentResponse>(Method::POST, &format!("/meshes/{}/segment", b.mesh_id), Some(json!({"k": 3})), StatusCode::OK).await;
        let t: ThingCreated = c.call(Method::POST, "/things", Some(json!({"mesh_ids": [a.mesh_id, b.mesh_id]})), StatusCode::CREATED).await;
        c.call::<ThingView>(Method::POST, &format!("/things/{}/classify", t.thing_id), None, StatusCode::OK).await;
        let view: ThingView = c
            .call(
                Method::PATCH,
                &format!("/things/{}/segments/{}/1", t.thing_id, a.mesh_id),
                Some(json!({"label": "functional_internal"})),
                StatusCode::OK,
            )
            .await;
        (t.thing_id, a, seg, view)
    };
    let c = Client::new(cfg());
    let info: MeshInfo = c.call(Method::GET, &format!("/meshes/{}", a.mesh_id), None, StatusCode::OK).await;
    assert_eq!(info.sha256, a.sha256);
    assert_eq!(info.segmentation_id.as_deref(), Some(seg.segmentation_id.as_str()));
    let reloaded: ThingView = c.call(Method::GET, &format!("/things/{thing_id}/report"), None, StatusCode::OK).await;
    assert_eq!(reloaded, view);
    // The reloaded segmentation is still the cached one.
    let again: SegmentResponse = c.call(Method::POST, &format!("/meshes/{}/segment", a.mesh_id), Some(json!({"k": 2})), StatusCode::OK).await;
    assert_eq!(again, seg);
    c.call::<Stylized>(Method::POST, &format!("/meshes/{}/stylize", a.mesh_id), Some(json!({"amplitude": 0.5})), StatusCode::OK)
        .await;
}

#[tokio::test]
async fn idle_state_expires() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(ServiceConfig {
        idle_expiry: Duration::from_millis(30),
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    })
    .unwrap();
    let c = Client { app: router(state.clone()) };
    let (lid, _) = snap_fit("i", SnapFit::default());
    let m = c.upload(&lid).await;
    c.call::<ThingCreated>(Method::POST, "/things", Some(json!({"mesh_ids": [m.mesh_id]})), StatusCode::CREATED).await;
    assert_eq!(state.expire_idle(), (0, 0));
    tokio::time::sleep(Duration::from_millis(60)).await;
    assert_eq!(state.expire_idle(), (1, 1));
    c.error(Method::GET, &format!("/meshes/{}", m.mesh_id), None, StatusCode::NOT_FOUND).await;
    assert_eq!(std::fs::read_dir(dir.path().join("meshes")).unwrap().count(), 0);
    let s: SessionView = c.call(Method::GET, "/session", None, StatusCode::OK).await;
    assert_eq!((s.meshes, s.things), (0, 0));
}

#[tokio::test]
async fn serves_over_tcp_with_cors() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(ServiceConfig::default()).unwrap();
    tokio::spawn(fabseg_service::serve(listener, state));
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /session HTTP/1.1\r\nHost: x\r\nOrigin: http://localhost:5173\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    assert!(out.starts_with("HTTP/1.1 200"), "{out}");
    assert!(out.to_ascii_lowercase().contains("access-control-allow-origin: *"), "{out}");
    let body = &out[out.find("\r\n\r\n").unwrap() + 4..];
    let s: SessionView = serde_json::from_str(body).unwrap();
    assert_eq!(s.corpus_entries, None);
}
