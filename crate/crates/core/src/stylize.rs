//! Selective procedural styling. Aesthetic vertices are displaced along
//! their normals by seeded fractal gradient noise and recolored; every
//! functional vertex keeps its exact input position.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::FunctionalityLabel;
use crate::mesh::{write_obj, MeshError, TriangleMesh, Vec3};
use crate::spectral::SegmentationResult;

/// Largest amplitude, as a fraction of the bounding-box diagonal.
pub const MAX_AMPLITUDE_FRACTION: f64 = 0.1;
/// Color of masked vertices on meshes without vertex colors.
pub const NEUTRAL_GRAY: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StyleError {
    #[error("amplitude {amplitude} mm exceeds {limit} mm (10% of the bounding-box diagonal)")]
    AmplitudeTooLarge { amplitude: f64, limit: f64 },
    #[error("invalid style: {0}")]
    InvalidSpec(String),
    #[error("mask has {mask} entries for {vertices} vertices")]
    MaskMismatch { mask: usize, vertices: usize },
    #[error("{labels} labels for k = {k}")]
    LabelCount { labels: usize, k: usize },
    #[error("segmentation has {labels} face labels for {faces} faces")]
    FaceCount { labels: usize, faces: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Per-vertex functional flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexMask {
    pub functional: Vec<bool>,
}

impl VertexMask {
    pub fn none(vertices: usize) -> Self {
        Self {
            functional: vec![false; vertices],
        }
    }

    pub fn masked_count(&self) -> usize {
        self.functional.iter().filter(|&&f| f).count()
    }
}

/// A vertex is functional when any incident face lies in a functional
/// segment.
pub fn build_mask(
    mesh: &TriangleMesh,
    segmentation: &SegmentationResult,
    labels: &[FunctionalityLabel],
) -> Result<VertexMask, StyleError> {
    if labels.len() != segmentation.k {
        return Err(StyleError::LabelCount {
            labels: labels.len(),
            k: segmentation.k,
        });
    }
    if segmentation.face_labels.len() != mesh.face_count() {
        return Err(StyleError::FaceCount {
            labels: segmentation.face_labels.len(),
            faces: mesh.face_count(),
        });
    }
    let mut mask = VertexMask::none(mesh.vertex_count());
    for (f, &s) in mesh.faces().iter().zip(&segmentation.face_labels) {
        let functional = labels.get(s as usize).is_some_and(|l| l.is_functional());
        if functional {
            for &v in f {
                mask.functional[v as usize] = true;
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleSpec {
    /// Peak displacement in mm.
    pub amplitude: f64,
    /// Noise cycles per bounding-box diagonal.
    pub frequency: f64,
    pub octaves: u32,
    /// Colors spread over the noise range, low to high.
    pub palette: Vec<[f64; 3]>,
    pub seed: u64,
}

impl Default for StyleSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            frequency: 4.0,
            octaves: 3,
            palette: vec![[0.15, 0.25, 0.55], [0.85, 0.75, 0.35], [0.75, 0.2, 0.2]],
            seed: 0,
        }
    }
}

impl StyleSpec {
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<(), StyleError> {
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(StyleError::InvalidSpec(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        let limit = MAX_AMPLITUDE_FRACTION * mesh.bbox_diagonal();
        if self.amplitude > limit {
            return Err(StyleError::AmplitudeTooLarge {
                amplitude: self.amplitude,
                limit,
            });
        }
        if !self.frequency.is_finite() || self.frequency <= 0.0 {
            return Err(StyleError::InvalidSpec(format!("frequency {} must be > 0", self.frequency)));
        }
        if !(1..=16).contains(&self.octaves) {
            return Err(StyleError::InvalidSpec(format!("octaves {} not in 1..=16", self.octaves)));
        }
        if self.palette.is_empty() {
            return Err(StyleError::InvalidSpec("palette is empty".into()));
        }
        if self.palette.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(StyleError::InvalidSpec("palette channels must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Improved Perlin gradient noise with a seeded permutation.
pub struct Perlin {
    perm: [u8; 512],
}

impl Perlin {
    pub fn new(seed: u64) -> Self {
        let mut p: Vec<u8> = (0..=255).collect();
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = p[i & 255];
        }
        Self { perm }
    }

    fn grad(hash: u8, x: f64, y: f64, z: f64) -> f64 {
        let h = hash & 15;
        let u = if h < 8 { x } else { y };
        let v = if h < 4 {
            y
        } else if h == 12 || h == 14 {
            x
        } else {
            z
        };
        (if h & 1 == 0 { u } else { -u }) + (if h & 2 == 0 { v } else { -v })
    }

    /// Roughly in `[-1, 1]`.
    pub fn noise(&self, p: Vec3) -> f64 {
        let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
        let lerp = |t: f64, a: f64, b: f64| a + t * (b - a);
        let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
        let (xi, yi, zi) = (
            (fx as i64 & 255) as usize,
            (fy as i64 & 255) as usize,
            (fz as i64 & 255) as usize,
        );
        let (x, y, z) = (p.x - fx, p.y - fy, p.z - fz);
        let (u, v, w) = (fade(x), fade(y), fade(z));
        let pm = &self.perm;
        let a = pm[xi] as usize + yi;
        let (aa, ab) = (pm[a] as usize + zi, pm[a + 1] as usize + zi);
        let b = pm[xi + 1] as usize + yi;
        let (ba, bb) = (pm[b] as usize + zi, pm[b + 1] as usize + zi);
        lerp(
            w,
            lerp(
                v,
                lerp(u, Self::grad(pm[aa], x, y, z), Self::grad(pm[ba], x - 1.0, y, z)),
                lerp(u, Self::grad(pm[ab], x, y - 1.0, z), Self::grad(pm[bb], x - 1.0, y - 1.0, z)),
            ),
            lerp(
                v,
                lerp(
                    u,
                    Self::grad(pm[aa + 1], x, y, z - 1.0),
                    Self::grad(pm[ba + 1], x - 1.0, y, z - 1.0),
                ),
                lerp(
                    u,
                    Self::grad(pm[ab + 1], x, y - 1.0, z - 1.0),
                    Self::grad(pm[bb + 1], x - 1.0, y - 1.0, z - 1.0),
                ),
            ),
        )
    }

    /// Fractal sum of `octaves` layers, normalized and clamped to `[-1, 1]`.
    pub fn fbm(&self, p: Vec3, octaves: u32) -> f64 {
        let (mut sum, mut norm, mut amp, mut freq) = (0.0, 0.0, 1.0, 1.0);
        for _ in 0..octaves {
            sum += amp * self.noise(p * freq);
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        (sum / norm).clamp(-1.0, 1.0)
    }
}

fn palette_color(palette: &[[f64; 3]], t: f64) -> [f64; 3] {
    if palette.len() == 1 {
        return palette[0];
    }
    let x = t.clamp(0.0, 1.0) * (palette.len() - 1) as f64;
    let i = (x.floor() as usize).min(palette.len() - 2);
    let f = x - i as f64;
    let (a, b) = (palette[i], palette[i + 1]);
    [0, 1, 2].map(|c| a[c] + f * (b[c] - a[c]))
}

/// Displace and recolor every unmasked vertex. Masked vertices are copied
/// unchanged, bit for bit.
pub fn apply_style(mesh: &TriangleMesh, mask: &VertexMask, spec: &StyleSpec) -> Result<TriangleMesh, StyleError> {
    if mask.functional.len() != mesh.vertex_count() {
        return Err(StyleError::MaskMismatch {
            mask: mask.functional.len(),
            vertices: mesh.vertex_count(),
        });
    }
    spec.validate(mesh)?;
    let (lo, _) = mesh.bounds();
    let diag = mesh.bbox_diagonal();
    let scale = if diag > 0.0 { spec.frequency / diag } else { 0.0 };
    let normals = mesh.vertex_normals();
    let perlin = Perlin::new(spec.seed);
    let input_colors = mesh.colors();
    // Keeps |displacement| <= amplitude after rounding.
    let reach = spec.amplitude * (1.0 - 1e-9);

    let styled: Vec<(Vec3, [f64; 3])> = mesh
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let kept_color = input_colors.map_or(NEUTRAL_GRAY, |c| c[i]);
            if mask.functional[i] {
                return (p, kept_color);
            }
            let n = perlin.fbm((p - lo) * scale, spec.octaves);
            let d = normals[i] * (reach * n);
            let moved = Vec3::new(
                if d.x == 0.0 { p.x } else { p.x + d.x },
                if d.y == 0.0 { p.y } else { p.y + d.y },
                if d.z == 0.0 { p.z } else { p.z + d.z },
            );
            (moved, palette_color(&spec.palette, 0.5 * (n + 1.0)))
        })
        .collect();
    let (vertices, colors): (Vec<Vec3>, Vec<[f64; 3]>) = styled.into_iter().unzip();
    let out = TriangleMesh::new(mesh.name(), vertices, mesh.faces().to_vec())
        .map_err(|e| StyleError::InvalidSpec(format!("styled mesh is invalid ({e}); lower the amplitude")))?;
    Ok(out.with_colors(colors)?)
}

/// Record of how a styled mesh was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleProvenance {
    pub tool: String,
    pub version: String,
    pub spec: StyleSpec,
    pub mesh: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub masked_vertices: usize,
    pub input_sha256: String,
    pub output_sha256: String,
}

pub fn provenance(input: &TriangleMesh, output: &TriangleMesh, mask: &VertexMask, spec: &StyleSpec) -> StyleProvenance {
    StyleProvenance {
        tool: "fabseg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        mesh: input.name().into(),
        vertex_count: input.vertex_count(),
        face_count: input.face_count(),
        masked_vertices: mask.masked_count(),
        input_sha256: crate::corpus::sha256_hex(write_obj(input).as_bytes()),
        output_sha256: crate::corpus::sha256_hex(write_obj(output).as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use FunctionalityLabel::*;

    fn halves(mesh: &TriangleMesh) -> SegmentationResult {
        let labels: Vec<u32> = (0..mesh.face_count()).map(|f| (mesh.face_centroid(f).z > 0.0) as u32).collect();
        SegmentationResult::from_labels(&labels, 0)
    }

    #[test]
    fn mask_rules() {
        let m = primitives::icosphere(1.0, 2);
        let seg = halves(&m);
        let all = build_mask(&m, &seg, &[FunctionalExternal, FunctionalInternal]).unwrap();
        assert_eq!(all.masked_count(), m.vertex_count());
        let none = build_mask(&m, &seg, &[Aesthetic, Aesthetic]).unwrap();
        assert_eq!(none.masked_count(), 0);
        // The border ring belongs to faces on both sides, so it is masked
        // whichever half is functional.
        for labels in [[FunctionalExternal, Aesthetic], [Aesthetic, FunctionalExternal]] {
            let mask = build_mask(&m, &seg, &labels).unwrap();
            for (f, &s) in m.faces().iter().zip(&seg.face_labels) {
                if labels[s as usize].is_functional() {
                    assert!(f.iter().all(|&v| mask.functional[v as usize]));
                }
            }
        }
        assert!(build_mask(&m, &seg, &[Aesthetic]).is_err());
    }

    #[test]
    fn border_vertex_is_masked() {
        let m = primitives::two_cubes_with_bridge();
        let labels: Vec<u32> = (0..m.face_count()).map(|f| (f >= 12) as u32).collect();
        let seg = SegmentationResult::from_labels(&labels, 0);
        let mask = build_mask(&m, &seg, &[Aesthetic, FunctionalExternal]).unwrap();
        // Vertex 5 is on cube A and on the bridge.
        assert!(mask.functional[5]);
        assert!(!mask.functional[0]);
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let m = primitives::icosphere(2.0, 2);
        let spec = StyleSpec {
            amplitude: 0.0,
            ..StyleSpec::default()
        };
        let out = apply_style(&m, &VertexMask::none(m.vertex_count()), &spec).unwrap();
        assert_eq!(out.vertices(), m.vertices());
    }

    #[test]
    fn hemisphere_masked() {
        let m = primitives::icosphere(10.0, 3);
        let mask = VertexMask {
            functional: m.vertices().iter().map(|p| p.z < 0.0).collect(),
        };
        let spec = StyleSpec {
            amplitude: 0.5,
            ..StyleSpec::default()
        };
        let out = apply_style(&m, &mask, &spec).unwrap();
        let normals = m.vertex_normals();
        let mut moved = 0;
        for i in 0..m.vertex_count() {
            let (p, q) = (m.vertices()[i], out.vertices()[i]);
            if mask.functional[i] {
                assert_eq!(p.map(f64::to_bits), q.map(f64::to_bits));
                assert_eq!(out.colors().unwrap()[i], NEUTRAL_GRAY);
            } else {
                let d = q - p;
                assert!(d.norm() <= 0.5);
                assert!(d.cross(&normals[i]).norm() < 1e-9);
                moved += (d.norm() > 0.0) as usize;
            }
        }
        assert!(moved > 0);
        assert_eq!(out.faces(), m.faces());
    }

    #[test]
    fn amplitude_bound() {
        let m = primitives::unit_cube();
        let spec = StyleSpec {
            amplitude: 0.2,
            ..StyleSpec::default()
        };
        assert!(matches!(
            apply_style(&m, &VertexMask::none(8), &spec),
            Err(StyleError::AmplitudeTooLarge { .. })
        ));
    }

    #[test]
    fn deterministic_and_seeded() {
        let m = primitives::icosphere(10.0, 2);
        let mask = VertexMask::none(m.vertex_count());
        let spec = StyleSpec::default();
        let a = apply_style(&m, &mask, &spec).unwrap();
        let b = apply_style(&m, &mask, &spec).unwrap();
        assert_eq!(write_obj(&a), write_obj(&b));
        let c = apply_style(&m, &mask, &StyleSpec { seed: 9, ..spec }).unwrap();
        assert_ne!(a.vertices(), c.vertices());
    }

    #[test]
    fn fbm_range() {
        let p = Perlin::new(3);
        for i in 0..2000 {
            let x = Vec3::new(i as f64 * 0.173, i as f64 * 0.071, i as f64 * 0.029);
            assert!(p.fbm(x, 4).abs() <= 1.0);
        }
    }
}
