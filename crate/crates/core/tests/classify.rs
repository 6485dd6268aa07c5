use std::sync::OnceLock;

use fabseg_core::classify::*;
use fabseg_core::corpus::synthetic::{snap_fit, starter_set, vase, SnapFit, SyntheticModel};
use fabseg_core::corpus::{build_index, CorpusIndex};
use fabseg_core::labels::FunctionalityLabel::{self, *};
use fabseg_core::shape::{mrg_similarity, ShapeParams};

struct Fixture {
    models: Vec<SyntheticModel>,
    index: CorpusIndex,
    shapes: Vec<ComponentShape>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let models = starter_set();
        let entries: Vec<_> = models.iter().map(SyntheticModel::to_entry).collect();
        let (index, _) = build_index(&entries, &ShapeParams::default(), None).unwrap();
        let shapes = (0..index.len())
            .map(|i| ComponentShape {
                mesh: index.mesh_mrgs[i].clone(),
                segments: index.segment_mrgs[i].clone(),
                disconnected: vec![false; index.segment_mrgs[i].len()],
            })
            .collect();
        Fixture { models, index, shapes }
    })
}

/// Straight re-derivation of the 5-mesh / 5-segment / majority rule.
fn oracle(shape: &ComponentShape, index: &CorpusIndex, skip: Option<usize>, p: &ClassifyParams) -> Vec<FunctionalityLabel> {
    let w = index.params.weight;
    let mut meshes: Vec<(f64, String, usize)> = (0..index.len())
        .filter(|&i| Some(i) != skip)
        .map(|i| {
            let s = mrg_similarity(&shape.mesh, &index.mesh_mrgs[i], w).unwrap().value;
            (s, index.entries[i].thing_id.clone(), i)
        })
        .collect();
    meshes.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    meshes.truncate(p.n_meshes);
    shape
        .segments
        .iter()
        .map(|g| {
            let mut pool = Vec::new();
            for (ms, id, i) in &meshes {
                for (j, h) in index.segment_mrgs[*i].iter().enumerate() {
                    let ss = mrg_similarity(g, h, w).unwrap().value;
                    pool.push((ms * ss, id.clone(), j, index.entries[*i].labels[j]));
                }
            }
            pool.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            pool.truncate(p.n_segments);
            let functional = pool.iter().filter(|v| v.3 != Aesthetic).count();
            if 2 * functional >= pool.len() {
                FunctionalExternal
            } else {
                Aesthetic
            }
        })
        .collect()
}

#[test]
fn external_vote_matches_oracle() {
    let f = fixture();
    assert!(f.index.len() <= 20);
    for p in [
        ClassifyParams::default(),
        ClassifyParams {
            n_meshes: 3,
            n_segments: 4,
            ..ClassifyParams::default()
        },
    ] {
        for i in 0..f.index.len() {
            let with_self = classify_shape(&f.shapes[i], "q", &f.index, &p, &|_| true).unwrap();
            assert_eq!(with_self.labels(), oracle(&f.shapes[i], &f.index, None, &p));
            let held_out = classify_shape(&f.shapes[i], "q", &f.index, &p, &|j| j != i).unwrap();
            assert_eq!(held_out.labels(), oracle(&f.shapes[i], &f.index, Some(i), &p), "{}", f.models[i].thing_id);
            assert!(held_out.mesh_neighbors.iter().all(|n| n.entry != i));
            for s in &held_out.segments {
                assert_eq!(s.vote_detail.len(), p.n_segments);
                assert_eq!(s.functional_votes + s.aesthetic_votes, s.vote_detail.len());
            }
        }
    }
}

#[test]
fn self_query_ranks_itself_first() {
    let f = fixture();
    let report = classify_shape(&f.shapes[0], "q", &f.index, &ClassifyParams::default(), &|_| true).unwrap();
    assert_eq!(report.mesh_neighbors[0].thing_id, f.models[0].thing_id);
    assert!(report.mesh_neighbors[0].similarity >= 1.0 - 1e-6);
    assert_eq!(report.mesh_neighbors.len(), 5);
}

#[test]
fn even_split_is_functional() {
    let m = vase("v", 40.0, 160.0, 14.0);
    let one = |id: &str, label| {
        let mut e = m.renamed(id, id).to_entry();
        e.segmentation = fabseg_core::spectral::SegmentationResult::from_labels(&vec![0; e.mesh.face_count()], 0);
        e.segment_labels = vec![label];
        e
    };
    let (index, _) = build_index(&[one("a", Aesthetic), one("f", FunctionalInternal)], &ShapeParams::default(), None).unwrap();
    let seg = fabseg_core::spectral::SegmentationResult::from_labels(&vec![0; m.mesh.face_count()], 0);
    let report = classify_external(&m.mesh, &seg, &index, &ClassifyParams::default()).unwrap();
    let s = &report.segments[0];
    assert_eq!((s.functional_votes, s.aesthetic_votes), (1, 1));
    assert_eq!(s.label, FunctionalExternal);
}

#[test]
fn exhausted_pool_is_an_error() {
    let f = fixture();
    let err = classify_shape(&f.shapes[0], "q", &f.index, &ClassifyParams::default(), &|_| false).unwrap_err();
    assert!(matches!(err, ClassifyError::CorpusExhausted { .. }), "{err}");
}

fn snap_components() -> (SyntheticModel, SyntheticModel, ComponentShape, ComponentShape) {
    let (lid, base) = snap_fit("snap", SnapFit::default());
    let p = ShapeParams::default();
    let sl = describe_component(&lid.mesh, &lid.segmentation(), &p).unwrap();
    let sb = describe_component(&base.mesh, &base.segmentation(), &p).unwrap();
    (lid, base, sl, sb)
}

#[test]
fn snap_fit_links_plug_and_socket() {
    let (lid, base, sl, sb) = snap_components();
    let comps = [
        LinkComponent {
            mesh_id: "lid",
            shape: &sl,
            external: &lid.labels,
        },
        LinkComponent {
            mesh_id: "base",
            shape: &sb,
            external: &base.labels,
        },
    ];
    let (set, warnings) = detect_linkages(&comps, DEFAULT_ALPHA, LinkageMode::Contextual, 0.5).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(set.pairs.len(), 1, "{set:?}");
    let p = &set.pairs[0];
    let ends = [(p.a.mesh_id.as_str(), p.a.segment), (p.b.mesh_id.as_str(), p.b.segment)];
    assert_eq!(ends, [("base", 2), ("lid", 0)]);
    assert!(p.similarity > DEFAULT_ALPHA);

    // Reordering the components changes nothing.
    let (swapped, _) = detect_linkages(&[comps[1], comps[0]], DEFAULT_ALPHA, LinkageMode::Contextual, 0.5).unwrap();
    assert_eq!(swapped, set);

    // Monotone in alpha.
    let mut previous: Option<LinkageSet> = None;
    for alpha in [0.5, 0.7, 0.86, 0.95] {
        let (s, _) = detect_linkages(&comps, alpha, LinkageMode::Contextual, 0.5).unwrap();
        if let Some(prev) = &previous {
            assert!(s.pairs.iter().all(|p| prev.pairs.contains(p)));
        }
        previous = Some(s);
    }
}

#[test]
fn external_segments_are_never_linked() {
    let (_, _, sl, sb) = snap_components();
    let all_ext = [FunctionalExternal, FunctionalExternal];
    let comps = [
        LinkComponent {
            mesh_id: "lid",
            shape: &sl,
            external: &all_ext,
        },
        LinkComponent {
            mesh_id: "base",
            shape: &sb,
            external: &[Aesthetic, Aesthetic, Aesthetic],
        },
    ];
    let (set, _) = detect_linkages(&comps, 0.0, LinkageMode::Raw, 0.5).unwrap();
    assert!(set.pairs.iter().all(|p| p.a.mesh_id != "lid" && p.b.mesh_id != "lid"));
}

#[test]
fn single_component_thing() {
    let f = fixture();
    let v = &f.shapes[0];
    let report = classify_thing(
        &[ThingComponent {
            mesh_id: "vase",
            shape: v,
        }],
        &f.index,
        &ClassifyParams::default(),
    )
    .unwrap();
    assert!(report.linkages.pairs.is_empty());
    assert_eq!(report.warnings.len(), 1);
    assert_eq!(report.labels[0].labels, report.reports[0].labels());
}

#[test]
fn snap_fit_thing_masks_plug_and_socket() {
    let f = fixture();
    let (_, _, sl, sb) = snap_components();
    let report = classify_thing(
        &[
            ThingComponent {
                mesh_id: "lid",
                shape: &sl,
            },
            ThingComponent {
                mesh_id: "base",
                shape: &sb,
            },
        ],
        &f.index,
        &ClassifyParams::default(),
    )
    .unwrap();
    let lid = &report.labels.iter().find(|c| c.mesh_id == "lid").unwrap().labels;
    let base = &report.labels.iter().find(|c| c.mesh_id == "base").unwrap().labels;
    assert!(lid[0].is_functional() && base[2].is_functional(), "{report:?}");
    assert_eq!((lid[1], base[1]), (Aesthetic, Aesthetic));
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["reports"][0]["segments"][0]["vote_detail"].is_array());
    assert!(json["linkages"]["alpha"].is_number());
}
