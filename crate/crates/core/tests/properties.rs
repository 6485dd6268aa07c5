use std::collections::HashSet;

use fabseg_core::classify::{select_linkages, Linkage, LinkageMode, SegmentRef};
use fabseg_core::labels::FunctionalityLabel;
use fabseg_core::mesh::{parse_obj, write_obj, MeshTopology, TriangleMesh};
use fabseg_core::primitives::{cylinder, icosphere, torus, unit_cube};
use fabseg_core::shape::{contextual_similarity, describe, mrg_similarity, ShapeParams};
use fabseg_core::spectral::{segment, SegmentParams, SegmentationResult};
use fabseg_core::stylize::{apply_style, build_mask, StyleSpec};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn jittered(base: &TriangleMesh, jitter: &[f64], scale: f64) -> TriangleMesh {
    let vertices = base
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| v * (1.0 + scale * jitter[i % jitter.len()]))
        .collect();
    TriangleMesh::new("fuzz", vertices, base.faces().to_vec()).unwrap()
}

fn base_mesh(kind: u8) -> TriangleMesh {
    match kind % 4 {
        0 => icosphere(1.0, 2),
        1 => cylinder(1.0, 3.0, 16, 0.5),
        2 => torus(2.0, 0.6, 20, 10),
        _ => icosphere(1.0, 1),
    }
}

fn seg_ref() -> impl Strategy<Value = SegmentRef> {
    (prop::sample::select(vec!["a", "b", "c"]), 0usize..4).prop_map(|(m, s)| SegmentRef {
        mesh_id: m.to_string(),
        segment: s,
    })
}

fn candidates() -> impl Strategy<Value = Vec<Linkage>> {
    prop::collection::vec((seg_ref(), seg_ref(), 0.0f64..1.0), 0..24).prop_map(|v| {
        v.into_iter()
            .filter(|(a, b, _)| a.mesh_id < b.mesh_id)
            .map(|(a, b, similarity)| Linkage { a, b, similarity })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn linkage_selection(cands in candidates(), alpha in 0.0f64..1.0, bump in 0.0f64..0.5) {
        let set = select_linkages(cands.clone(), alpha, LinkageMode::Contextual);
        let mut used = HashSet::new();
        for p in &set.pairs {
            prop_assert!(p.similarity > alpha);
            prop_assert!(used.insert(p.a.clone()) && used.insert(p.b.clone()));
        }
        let strict = select_linkages(cands, (alpha + bump).min(1.0), LinkageMode::Contextual);
        // Raising alpha only drops candidates from the bottom of the order.
        prop_assert!(strict.pairs.iter().all(|p| set.pairs.contains(p)));
    }

    #[test]
    fn contextual_is_a_bounded_product(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let c = contextual_similarity(a, b);
        prop_assert_eq!(c, a * b);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(c <= a.min(b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn contextual_product_thousand(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assert_eq!(contextual_similarity(a, b), contextual_similarity(b, a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn segmentation_partitions_faces(
        kind in 0u8..4,
        jitter in prop::collection::vec(-1.0f64..1.0, 7),
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mesh = jittered(&base_mesh(kind), &jitter, 0.05);
        let seg = segment(&mesh, Some(k), &SegmentParams::with_seed(seed)).unwrap();
        prop_assert_eq!(seg.k, k);
        prop_assert_eq!(seg.face_labels.len(), mesh.face_count());
        prop_assert!(seg.validate(mesh.face_count()).is_ok());
        let seen: HashSet<u32> = seg.face_labels.iter().copied().collect();
        prop_assert_eq!(seen.len(), k);
    }

    #[test]
    fn topology_is_symmetric(kind in 0u8..4, jitter in prop::collection::vec(-1.0f64..1.0, 5)) {
        let mesh = jittered(&base_mesh(kind), &jitter, 0.1);
        let topo = MeshTopology::build(&mesh);
        for (f, adj) in topo.face_adjacency.iter().enumerate() {
            for &g in adj {
                prop_assert!(topo.face_adjacency[g as usize].contains(&(f as u32)));
                prop_assert!(g as usize != f);
            }
        }
    }

    #[test]
    fn obj_round_trip(kind in 0u8..4, jitter in prop::collection::vec(-1.0f64..1.0, 9), scale in 0.001f64..1000.0) {
        let mesh = jittered(&base_mesh(kind), &jitter, 0.2).scaled(scale).with_name("rt");
        let once = parse_obj(write_obj(&mesh).as_bytes()).unwrap();
        prop_assert_eq!(once.faces(), mesh.faces());
        for (a, b) in once.vertices().iter().zip(mesh.vertices()) {
            // Nine significant digits.
            prop_assert!((a - b).norm() <= 1e-8 * b.norm());
        }
        let twice = parse_obj(write_obj(&once).as_bytes()).unwrap();
        prop_assert_eq!(twice, once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn styling_leaves_functional_vertices(
        kind in 0u8..4,
        labels in prop::collection::vec(0u32..3, 1..64),
        functional in prop::collection::vec(any::<bool>(), 3),
        amplitude in 0.0f64..0.15,
        frequency in 0.1f64..10.0,
        octaves in 1u32..5,
        seed in any::<u64>(),
    ) {
        let mesh = base_mesh(kind);
        let face_labels: Vec<u32> = (0..mesh.face_count()).map(|f| labels[f % labels.len()]).collect();
        let seg = SegmentationResult::from_labels(&face_labels, 0);
        let segment_labels: Vec<FunctionalityLabel> = (0..seg.k)
            .map(|j| if functional[j] { FunctionalityLabel::FunctionalInternal } else { FunctionalityLabel::Aesthetic })
            .collect();
        let mask = build_mask(&mesh, &seg, &segment_labels).unwrap();
        let spec = StyleSpec { amplitude, frequency, octaves, seed, ..StyleSpec::default() };
        let out = apply_style(&mesh, &mask, &spec).unwrap();
        prop_assert_eq!(out.faces(), mesh.faces());
        for (i, (a, b)) in out.vertices().iter().zip(mesh.vertices()).enumerate() {
            if mask.functional[i] {
                prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
                prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
                prop_assert_eq!(a.z.to_bits(), b.z.to_bits());
            } else {
                prop_assert!((a - b).norm() <= amplitude);
            }
        }
    }
}

fn small_params() -> ShapeParams {
    ShapeParams {
        base_points: 60,
        ..ShapeParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mrg_similarity_is_symmetric(a in 0u8..4, b in 0u8..4) {
        let p = small_params();
        let ga = describe(&base_mesh(a), &p).unwrap();
        let gb = describe(&base_mesh(b), &p).unwrap();
        let ab = mrg_similarity(&ga, &gb, p.weight).unwrap().value;
        let ba = mrg_similarity(&gb, &ga, p.weight).unwrap().value;
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn mrg_is_rigid_motion_invariant(
        kind in 0u8..4,
        axis in (-1.0f64..1.0, -1.0f64..1.0, 0.1f64..1.0),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0),
    ) {
        // Farthest-point ties on these symmetric meshes are decided by
        // rounding, so too few base points makes μ sampling-dependent.
        let p = ShapeParams::default();
        let mesh = base_mesh(kind);
        let axis = nalgebra::Unit::new_normalize(Vector3::new(axis.0, axis.1, axis.2));
        let moved = mesh.transformed(&Rotation3::from_axis_angle(&axis, angle), Vector3::new(shift.0, shift.1, shift.2));
        let g0 = describe(&mesh, &p).unwrap();
        let g1 = describe(&moved, &p).unwrap();
        let s = mrg_similarity(&g0, &g1, p.weight).unwrap().value;
        prop_assert!(s >= 0.99, "similarity {s}");
    }
}

#[test]
fn cube_self_similarity_is_one() {
    let p = small_params();
    let g = describe(&unit_cube(), &p).unwrap();
    assert!((mrg_similarity(&g, &g, p.weight).unwrap().value - 1.0).abs() < 1e-12);
}
