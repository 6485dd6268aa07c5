//! Indexed triangle meshes: ingestion, validation, topology and remeshing.
//!
//! All coordinates are millimeters. A [`TriangleMesh`] is immutable once
//! constructed; every operation here returns a new value.

mod bvh;
mod components;
mod io;
mod remesh;
mod topology;

pub use bvh::TriangleBvh;
pub use components::connected_components;
pub(crate) use components::{components_within, face_components};
pub use io::{parse_mesh, parse_obj, parse_stl, write_obj, write_stl_binary, MeshFormat};
pub use remesh::{remesh, subdivide_midpoint, RemeshParams, DEFAULT_TARGET_FACES};
pub use topology::{EdgeRecord, MeshTopology};

use nalgebra::Vector3;
use thiserror::Error;

/// A point or direction in model space (millimeters).
pub type Vec3 = Vector3<f64>;

/// Faces whose area falls below this are considered degenerate (mm²).
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed STL: {0}")]
    Stl(String),
    #[error("mesh is empty: {0}")]
    Empty(String),
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfBounds { face: usize, index: usize, count: usize },
    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },
    #[error("face {face} is degenerate (area {area:e} mm²)")]
    Degenerate { face: usize, area: f64 },
    #[error("vertex color count {colors} does not match vertex count {vertices}")]
    ColorCount { colors: usize, vertices: usize },
    #[error("invalid remesh parameters: {0}")]
    InvalidParams(String),
    #[error("remesh could not reach target {target} faces (achieved {achieved})")]
    TargetUnreachable { target: usize, achieved: usize },
    #[error("unrecognized mesh format: {0}")]
    UnknownFormat(String),
}

/// Indexed triangle mesh with optional per-vertex RGB colors in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    name: String,
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    colors: Option<Vec<[f64; 3]>>,
}

impl TriangleMesh {
    /// Build a mesh, checking every invariant.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        let mesh = Self {
            name: name.into(),
            vertices,
            faces,
            colors: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Build a mesh, silently dropping faces that are degenerate or repeat a
    /// vertex. Index bounds are still enforced. Returns the number dropped.
    pub fn new_lenient(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        mut faces: Vec<[u32; 3]>,
    ) -> Result<(Self, usize), MeshError> {
        let before = faces.len();
        faces.retain(|f| {
            let idx_ok = f.iter().all(|&i| (i as usize) < vertices.len());
            // Out-of-bounds faces are kept so `validate` reports them.
            !idx_ok || (f[0] != f[1] && f[1] != f[2] && f[0] != f[2] && tri_area(&vertices, f) >= DEGENERATE_AREA)
        });
        let dropped = before - faces.len();
        Ok((Self::new(name, vertices, faces)?, dropped))
    }

    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self, MeshError> {
        if colors.len() != self.vertices.len() {
            return Err(MeshError::ColorCount {
                colors: colors.len(),
                vertices: self.vertices.len(),
            });
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn without_colors(mut self) -> Self {
        self.colors = None;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same faces and colors, new positions. Faces are not re-validated for
    /// area since displacement may legitimately create slivers.
    pub(crate) fn with_positions(&self, vertices: Vec<Vec3>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Self {
            name: self.name.clone(),
            vertices,
            faces: self.faces.clone(),
            colors: self.colors.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(
        name: String,
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        colors: Option<Vec<[f64; 3]>>,
    ) -> Self {
        Self {
            name,
            vertices,
            faces,
            colors,
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(MeshError::Empty(format!(
                "{} vertices, {} faces",
                self.vertices.len(),
                self.faces.len()
            )));
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfBounds {
                        face: fi,
                        index: i as usize,
                        count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex { face: fi });
            }
            let area = tri_area(&self.vertices, f);
            if !(area >= DEGENERATE_AREA) {
                return Err(MeshError::Degenerate { face: fi, area });
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(MeshError::ColorCount {
                    colors: c.len(),
                    vertices: n,
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        self.colors.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        tri_area(&self.vertices, &self.faces[f])
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Unit face normal following the counter-clockwise winding.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        (a + b + c) / 3.0
    }

    /// Area-weighted vertex normals; isolated vertices get a zero normal.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let a = self.vertices[f[0] as usize];
            let b = self.vertices[f[1] as usize];
            let c = self.vertices[f[2] as usize];
            // Cross product magnitude is twice the area, so this is area-weighted.
            let n = (b - a).cross(&(c - a));
            for &i in f {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Submesh made of the given faces, with vertices re-indexed in order of
    /// first appearance. Colors are carried over.
    pub fn submesh(&self, faces: &[usize]) -> Result<TriangleMesh, MeshError> {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        let mut out = Vec::with_capacity(faces.len());
        for &f in faces {
            let mut tri = [0u32; 3];
            for (k, &v) in self.faces[f].iter().enumerate() {
                let v = v as usize;
                if remap[v] == u32::MAX {
                    remap[v] = vertices.len() as u32;
                    vertices.push(self.vertices[v]);
                    if let (Some(dst), Some(src)) = (colors.as_mut(), self.colors.as_ref()) {
                        dst.push(src[v]);
                    }
                }
                tri[k] = remap[v];
            }
            out.push(tri);
        }
        let mesh = TriangleMesh::new(self.name.clone(), vertices, out)?;
        match colors {
            Some(c) => mesh.with_colors(c),
            None => Ok(mesh),
        }
    }

    /// Apply a rigid transform `p -> rotation * p + translation`.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: Vec3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| rotation * p + translation)
            .collect();
        self.with_positions(vertices)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.with_positions(self.vertices.iter().map(|p| p * factor).collect())
    }
}

pub(crate) fn tri_area(vertices: &[Vec3], f: &[u32; 3]) -> f64 {
    let a = vertices[f[0] as usize];
    let b = vertices[f[1] as usize];
    let c = vertices[f[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}
