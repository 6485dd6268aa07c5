//! Binary MRG sidecar: `"MRG1"`, little-endian body, SHA-256 trailer.

use sha2::{Digest, Sha256};

use super::mrg::{Mrg, MrgNode};
use super::ShapeError;

const MAGIC: &[u8; 4] = b"MRG1";
const VERSION: u32 = 1;
const NO_PARENT: u32 = u32::MAX;

pub fn to_bytes(g: &Mrg) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + g.node_count() * 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&g.resolution.to_le_bytes());
    out.extend_from_slice(&g.face_count.to_le_bytes());
    out.extend_from_slice(&g.total_area.to_le_bytes());
    out.extend_from_slice(&(g.levels.len() as u32).to_le_bytes());
    for level in &g.levels {
        out.extend_from_slice(&(level.len() as u32).to_le_bytes());
        for n in level {
            out.extend_from_slice(&n.interval.to_le_bytes());
            out.extend_from_slice(&n.area.to_le_bytes());
            out.extend_from_slice(&n.length.to_le_bytes());
            out.extend_from_slice(&n.mu_min.to_le_bytes());
            out.extend_from_slice(&n.mu_max.to_le_bytes());
            out.extend_from_slice(&n.parent.unwrap_or(NO_PARENT).to_le_bytes());
            out.extend_from_slice(&n.face_count.to_le_bytes());
            out.extend_from_slice(&(n.neighbors.len() as u32).to_le_bytes());
            for &nb in &n.neighbors {
                out.extend_from_slice(&nb.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ShapeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ShapeError::Sidecar("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ShapeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ShapeError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Mrg, ShapeError> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..4] != MAGIC {
        return Err(ShapeError::Sidecar("bad magic".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(ShapeError::Sidecar("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ShapeError::Sidecar(format!("unsupported version {version}")));
    }
    let resolution = r.u32()?;
    let face_count = r.u32()?;
    let total_area = r.f64()?;
    let level_count = r.u32()? as usize;
    if level_count != resolution as usize + 1 {
        return Err(ShapeError::Sidecar("level count does not match resolution".into()));
    }
    let mut levels = Vec::with_capacity(level_count);
    for _ in 0..level_count {
        let count = r.u32()? as usize;
        let mut level = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let interval = r.u32()?;
            let area = r.f64()?;
            let length = r.f64()?;
            let mu_min = r.f64()?;
            let mu_max = r.f64()?;
            let parent = r.u32()?;
            let face_count = r.u32()?;
            let nb = r.u32()? as usize;
            let mut neighbors = Vec::with_capacity(nb.min(1 << 16));
            for _ in 0..nb {
                neighbors.push(r.u32()?);
            }
            level.push(MrgNode {
                interval,
                area,
                length,
                mu_min,
                mu_max,
                parent: (parent != NO_PARENT).then_some(parent),
                neighbors,
                face_count,
            });
        }
        levels.push(level);
    }
    if r.pos != body.len() {
        return Err(ShapeError::Sidecar("trailing bytes".into()));
    }
    Ok(Mrg {
        resolution,
        total_area,
        face_count,
        levels,
    })
}
