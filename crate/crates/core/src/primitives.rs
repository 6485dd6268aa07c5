//! Parametric mesh generators.
//!
//! Surfaces of revolution carry a per-face tag naming the profile leg each
//! face came from, which the synthetic corpus uses as ground-truth parts.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{TriangleMesh, Vec3};

/// Axis-aligned unit cube `[0,1]³`, 12 outward-facing triangles.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Vec3::zeros(), Vec3::repeat(1.0))
}

pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let v = |x: usize, y: usize, z: usize| {
        Vec3::new(
            if x == 0 { lo.x } else { hi.x },
            if y == 0 { lo.y } else { hi.y },
            if z == 0 { lo.z } else { hi.z },
        )
    };
    let vertices = vec![
        v(0, 0, 0),
        v(1, 0, 0),
        v(1, 1, 0),
        v(0, 1, 0),
        v(0, 0, 1),
        v(1, 0, 1),
        v(1, 1, 1),
        v(0, 1, 1),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh::new("box", vertices, faces).expect("box is valid")
}

/// Icosahedron refined `subdivisions` times and projected onto the sphere.
/// Face count is `20 · 4^subdivisions`.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new("icosphere", vertices, faces).expect("icosphere is valid")
}

/// Latitude/longitude sphere with `rings` latitude bands and `segments`
/// longitudes. Face count is `2 · segments · (rings − 1)`.
pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let profile: Vec<(f64, f64)> = (0..=rings)
        .map(|i| {
            let theta = PI * i as f64 / rings as f64;
            (radius * theta.sin(), -radius * theta.cos())
        })
        .collect();
    let tags = vec![0; rings];
    revolve(&profile, &tags, segments).0.with_name("uv_sphere")
}

/// Closed cylinder along z from 0 to `height`, with capped ends.
pub fn cylinder(radius: f64, height: f64, segments: usize, step: f64) -> TriangleMesh {
    let profile = [(0.0, 0.0), (radius, 0.0), (radius, height), (0.0, height)];
    let (pts, tags) = resample_profile(&profile, &[0, 1, 2], step);
    revolve(&pts, &tags, segments).0.with_name("cylinder")
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(major_segments * minor_segments);
    for i in 0..major_segments {
        let u = 2.0 * PI * i as f64 / major_segments as f64;
        for j in 0..minor_segments {
            let v = 2.0 * PI * j as f64 / minor_segments as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % major_segments) * minor_segments + (j % minor_segments)) as u32;
    let mut faces = Vec::new();
    for i in 0..major_segments {
        for j in 0..minor_segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new("torus", vertices, faces).expect("torus is valid")
}

/// Sphere pushed out into `arms` lobes in the xy plane.
pub fn star(arms: usize, arm_length: f64, subdivisions: u32) -> TriangleMesh {
    let base = icosphere(1.0, subdivisions);
    let dirs: Vec<Vec3> = (0..arms)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / arms as f64 + 0.1;
            Vec3::new(a.cos(), a.sin(), 0.0)
        })
        .collect();
    let vertices = base
        .vertices()
        .iter()
        .map(|v| {
            let lobe = dirs
                .iter()
                .map(|d| v.dot(d).max(0.0).powi(8))
                .fold(0.0, f64::max);
            v * (1.0 + arm_length * lobe)
        })
        .collect();
    TriangleMesh::new("star", vertices, base.faces().to_vec()).expect("star is valid")
}

/// Two unit cubes side by side joined by a flat four-triangle ribbon along
/// their top edges. 28 faces; the ribbon attaches through non-manifold edges.
pub fn two_cubes_with_bridge() -> TriangleMesh {
    let a = unit_cube();
    let b = box_mesh(Vec3::new(2.0, 0.0, 0.0), Vec3::new(3.0, 1.0, 1.0));
    let mut vertices = a.vertices().to_vec();
    vertices.extend_from_slice(b.vertices());
    let mut faces = a.faces().to_vec();
    faces.extend(b.faces().iter().map(|f| f.map(|i| i + 8)));
    // Cube A top-right edge: 5 (1,0,1), 6 (1,1,1). Cube B top-left edge: 12 (2,0,1), 15 (2,1,1).
    vertices.push(Vec3::new(1.5, 0.0, 1.0)); // 16
    vertices.push(Vec3::new(1.5, 1.0, 1.0)); // 17
    faces.extend_from_slice(&[[5, 16, 17], [5, 17, 6], [16, 12, 15], [16, 15, 17]]);
    TriangleMesh::new("two_cubes", vertices, faces).expect("bridge mesh is valid")
}

/// Split each leg of a polyline profile into pieces no longer than `step`.
/// `leg_tags[i]` tags the leg from point `i` to `i+1`.
pub fn resample_profile(points: &[(f64, f64)], leg_tags: &[u32], step: f64) -> (Vec<(f64, f64)>, Vec<u32>) {
    assert_eq!(points.len(), leg_tags.len() + 1);
    let mut out = vec![points[0]];
    let mut tags = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let pieces = ((len / step).ceil() as usize).max(1);
        for s in 1..=pieces {
            let t = s as f64 / pieces as f64;
            out.push((a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t));
            tags.push(leg_tags[i]);
        }
    }
    (out, tags)
}

/// Revolve a profile `(radius, z)` around the z axis. Profile points with
/// zero radius are only allowed at the ends, where they become poles.
/// `tags[i]` labels the faces generated by profile edge `i`. Returns the mesh
/// and a per-face tag.
pub fn revolve(profile: &[(f64, f64)], tags: &[u32], segments: usize) -> (TriangleMesh, Vec<u32>) {
    assert!(profile.len() >= 2 && tags.len() == profile.len() - 1);
    assert!(segments >= 3);
    let mut vertices = Vec::new();
    // Per profile point: either one pole vertex or a ring of `segments`.
    let mut rings: Vec<Result<u32, u32>> = Vec::new(); // Ok(pole) / Err(ring start)
    for &(r, z) in profile {
        if r.abs() < 1e-12 {
            rings.push(Ok(vertices.len() as u32));
            vertices.push(Vec3::new(0.0, 0.0, z));
        } else {
            rings.push(Err(vertices.len() as u32));
            for j in 0..segments {
                let phi = 2.0 * PI * j as f64 / segments as f64;
                vertices.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
            }
        }
    }
    let at = |ring: Result<u32, u32>, j: usize| match ring {
        Ok(p) => p,
        Err(s) => s + (j % segments) as u32,
    };
    let mut faces = Vec::new();
    let mut face_tags = Vec::new();
    for i in 0..profile.len() - 1 {
        let (lo, hi) = (rings[i], rings[i + 1]);
        for j in 0..segments {
            let (a, b) = (at(lo, j), at(lo, j + 1));
            let (c, d) = (at(hi, j + 1), at(hi, j));
            if a != b {
                faces.push([a, b, c]);
                face_tags.push(tags[i]);
            }
            if c != d {
                faces.push([a, c, d]);
                face_tags.push(tags[i]);
            }
        }
    }
    let mesh = TriangleMesh::new("revolved", vertices, faces).expect("profile must not be degenerate");
    (mesh, face_tags)
}
