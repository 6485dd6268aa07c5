//! OBJ and STL reading and writing.

use std::collections::HashMap;
use std::fmt::Write as _;

use tracing::warn;

use super::{MeshError, TriangleMesh, Vec3};

/// STL vertices closer than this are welded into one (mm).
pub const STL_WELD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
}

impl MeshFormat {
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Self::Obj),
            "stl" => Some(Self::Stl),
            _ => None,
        }
    }

    /// Guess from content: binary STL or anything starting with "solid" is
    /// STL, everything else is OBJ.
    pub fn sniff(bytes: &[u8]) -> Self {
        if looks_like_binary_stl(bytes) || bytes.trim_ascii_start().starts_with(b"solid") {
            Self::Stl
        } else {
            Self::Obj
        }
    }
}

/// Parse with an explicit format, or sniff the content when `None`.
pub fn parse_mesh(bytes: &[u8], format: Option<MeshFormat>, name: &str) -> Result<TriangleMesh, MeshError> {
    let mesh = match format.unwrap_or_else(|| MeshFormat::sniff(bytes)) {
        MeshFormat::Obj => parse_obj(bytes)?,
        MeshFormat::Stl => parse_stl(bytes)?,
    };
    Ok(mesh.with_name(name))
}

/// Parse an ASCII OBJ. Polygons are fan-triangulated; normals, texture
/// coordinates, groups and materials are ignored. `v` records carrying six
/// numbers are read as position plus RGB color.
pub fn parse_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        line: line_of_offset(bytes, e.valid_up_to()),
        message: "input is not UTF-8 text".into(),
    })?;

    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut all_colored = true;
    // (face, line) so index errors can name their source line.
    let mut faces: Vec<([i64; 3], usize)> = Vec::new();
    let mut name = String::from("mesh");

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap_or("");
        match tag {
            "v" => {
                let nums: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
                let nums = nums.map_err(|e| MeshError::Parse {
                    line: line_no,
                    message: format!("bad vertex coordinate: {e}"),
                })?;
                if nums.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("vertex needs 3 coordinates, got {}", nums.len()),
                    });
                }
                if nums[..3].iter().any(|x| !x.is_finite()) {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: "non-finite vertex coordinate".into(),
                    });
                }
                vertices.push(Vec3::new(nums[0], nums[1], nums[2]));
                if nums.len() >= 6 {
                    colors.push([nums[3], nums[4], nums[5]]);
                } else {
                    all_colored = false;
                }
            }
            "f" => {
                let mut idx = Vec::new();
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| MeshError::Parse {
                        line: line_no,
                        message: format!("bad face index '{tok}'"),
                    })?;
                    let resolved = match i {
                        0 => {
                            return Err(MeshError::Parse {
                                line: line_no,
                                message: "face index 0 is invalid (OBJ is 1-based)".into(),
                            })
                        }
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, got {}", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push(([idx[0], idx[k], idx[k + 1]], line_no));
                }
            }
            "o" | "g" => {
                if let Some(n) = parts.next() {
                    if name == "mesh" {
                        name = n.to_string();
                    }
                }
            }
            _ => {}
        }
    }

    if faces.is_empty() || vertices.is_empty() {
        return Err(MeshError::Empty("OBJ has no faces".into()));
    }
    let nv = vertices.len() as i64;
    let mut tris = Vec::with_capacity(faces.len());
    for (f, line) in faces {
        for &i in &f {
            if i < 0 || i >= nv {
                return Err(MeshError::Parse {
                    line,
                    message: format!("face index {} out of range (mesh has {} vertices)", i + 1, nv),
                });
            }
        }
        tris.push([f[0] as u32, f[1] as u32, f[2] as u32]);
    }

    let (mesh, dropped) = TriangleMesh::new_lenient(name, vertices, tris)?;
    if dropped > 0 {
        warn!(dropped, "dropped degenerate faces while reading OBJ");
    }
    if all_colored && !colors.is_empty() {
        let colors = colors
            .into_iter()
            .map(|c| c.map(|x| x.clamp(0.0, 1.0)))
            .collect();
        return mesh.with_colors(colors);
    }
    Ok(mesh)
}

fn line_of_offset(bytes: &[u8], offset: usize) -> usize {
    bytes[..offset].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Parse ASCII or binary STL, welding coincident vertices.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let triangles = if bytes.trim_ascii_start().starts_with(b"solid") {
        match parse_stl_ascii(bytes) {
            Ok(t) => t,
            // Some exporters write "solid" into binary headers.
            Err(e) if looks_like_binary_stl(bytes) => {
                parse_stl_binary(bytes).map_err(|_| e)?
            }
            Err(e) => return Err(e),
        }
    } else {
        parse_stl_binary(bytes)?
    };
    if triangles.is_empty() {
        return Err(MeshError::Stl("zero triangles".into()));
    }
    let (vertices, faces) = weld(&triangles, STL_WELD_TOLERANCE);
    let (mesh, dropped) = TriangleMesh::new_lenient("mesh", vertices, faces)?;
    if dropped > 0 {
        warn!(dropped, "dropped degenerate faces while reading STL");
    }
    Ok(mesh)
}

fn looks_like_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + 50 * n
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, MeshError> {
    if bytes.len() < 84 {
        return Err(MeshError::Stl(format!(
            "binary STL needs at least 84 bytes, got {}",
            bytes.len()
        )));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let need = 84 + 50 * n;
    if bytes.len() < need {
        return Err(MeshError::Stl(format!(
            "truncated body: header declares {n} triangles ({need} bytes), file has {} bytes",
            bytes.len()
        )));
    }
    let read = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut tris = Vec::with_capacity(n);
    for t in 0..n {
        let base = 84 + 50 * t + 12;
        let mut tri = [Vec3::zeros(); 3];
        for (k, v) in tri.iter_mut().enumerate() {
            let o = base + 12 * k;
            *v = Vec3::new(read(o), read(o + 4), read(o + 8));
            if !v.iter().all(|x| x.is_finite()) {
                return Err(MeshError::Stl(format!("non-finite vertex in triangle {t}")));
            }
        }
        tris.push(tri);
    }
    Ok(tris)
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Stl("ASCII STL is not UTF-8".into()))?;
    let mut tris = Vec::new();
    let mut current: Vec<Vec3> = Vec::new();
    let mut in_facet = false;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let mut parts = raw.split_whitespace();
        match parts.next() {
            Some("facet") => {
                in_facet = true;
                current.clear();
            }
            Some("vertex") => {
                if !in_facet {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: "vertex outside facet".into(),
                    });
                }
                let nums: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
                match nums {
                    Ok(n) if n.len() == 3 && n.iter().all(|x| x.is_finite()) => {
                        current.push(Vec3::new(n[0], n[1], n[2]))
                    }
                    _ => {
                        return Err(MeshError::Parse {
                            line: line_no,
                            message: "vertex needs 3 numbers".into(),
                        })
                    }
                }
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("facet has {} vertices, expected 3", current.len()),
                    });
                }
                tris.push([current[0], current[1], current[2]]);
                in_facet = false;
            }
            Some("solid") | Some("outer") | Some("endloop") | Some("endsolid") | None => {}
            Some(other) => {
                return Err(MeshError::Parse {
                    line: line_no,
                    message: format!("unexpected keyword '{other}'"),
                })
            }
        }
    }
    if in_facet {
        return Err(MeshError::Stl("unterminated facet".into()));
    }
    Ok(tris)
}

/// Merge vertices within `tol` of an earlier vertex. Deterministic in input
/// order: the first occurrence keeps its position.
fn weld(tris: &[[Vec3; 3]], tol: f64) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let cell = |p: &Vec3| {
        (
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces = Vec::with_capacity(tris.len());
    let tol2 = tol * tol;
    for tri in tris {
        let mut f = [0u32; 3];
        for (k, p) in tri.iter().enumerate() {
            let (cx, cy, cz) = cell(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &vi in list {
                                if (vertices[vi as usize] - p).norm_squared() <= tol2 {
                                    found = Some(vi);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            f[k] = match found {
                Some(vi) => vi,
                None => {
                    let vi = vertices.len() as u32;
                    vertices.push(*p);
                    grid.entry((cx, cy, cz)).or_default().push(vi);
                    vi
                }
            };
        }
        faces.push(f);
    }
    (vertices, faces)
}

/// Format with 9 significant digits, shortest form (like C's `%.9g`).
pub(crate) fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let s = format!("{:.8e}", x);
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let mut out = format!("{:.*}", decimals, x);
        if out.contains('.') {
            while out.ends_with('0') {
                out.pop();
            }
            if out.ends_with('.') {
                out.pop();
            }
        }
        if out == "-0" {
            out = "0".into();
        }
        out
    } else {
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        format!("{m}e{exp}")
    }
}

/// Write an ASCII OBJ. Colored meshes use extended `v x y z r g b` records.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 24);
    let _ = writeln!(out, "o {}", sanitize_name(mesh.name()));
    let colors = mesh.colors();
    for (i, v) in mesh.vertices().iter().enumerate() {
        let _ = write!(out, "v {} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z));
        if let Some(c) = colors {
            let _ = write!(out, " {} {} {}", fmt_sig9(c[i][0]), fmt_sig9(c[i][1]), fmt_sig9(c[i][2]));
        }
        out.push('\n');
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

fn sanitize_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if s.is_empty() {
        "mesh".into()
    } else {
        s
    }
}

/// Binary little-endian STL (colors are dropped).
pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.face_count());
    let mut header = [0u8; 80];
    let tag = b"fabseg binary stl";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.face_count() as u32).to_le_bytes());
    for f in 0..mesh.face_count() {
        let n = mesh.face_normal(f);
        for x in n.iter() {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        for v in mesh.face_vertices(f) {
            for x in v.iter() {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}
