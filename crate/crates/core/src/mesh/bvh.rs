//! Axis-aligned bounding volume hierarchy for closest-point queries.

use super::{TriangleMesh, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    // Leaf: `start..start+count` into `order`. Inner: children at `left`, `left+1`.
    start: u32,
    count: u32,
    left: u32,
}

/// Static BVH over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.face_count()).map(|f| mesh.face_vertices(f)).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            lo: Vec3::zeros(),
            hi: Vec3::zeros(),
            start: 0,
            count: tris.len() as u32,
            left: 0,
        });
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let (start, count) = (nodes[ni].start as usize, nodes[ni].count as usize);
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            let mut clo = Vec3::repeat(f64::INFINITY);
            let mut chi = Vec3::repeat(f64::NEG_INFINITY);
            for &t in &order[start..start + count] {
                for p in &tris[t as usize] {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                clo = clo.inf(&centroids[t as usize]);
                chi = chi.sup(&centroids[t as usize]);
            }
            nodes[ni].lo = lo;
            nodes[ni].hi = hi;
            if count <= LEAF_SIZE {
                continue;
            }
            let axis = (chi - clo).imax();
            let slice = &mut order[start..start + count];
            let mid = count / 2;
            slice.select_nth_unstable_by(mid, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                lo,
                hi,
                start: start as u32,
                count: mid as u32,
                left: 0,
            });
            nodes.push(Node {
                lo,
                hi,
                start: (start + mid) as u32,
                count: (count - mid) as u32,
                left: 0,
            });
            nodes[ni].left = left as u32;
            nodes[ni].count = 0;
            stack.push(left);
            stack.push(left + 1);
        }
        Self { tris, order, nodes }
    }

    /// Closest surface point to `p` and its squared distance.
    pub fn closest_point(&self, p: &Vec3) -> (Vec3, f64) {
        let mut best = (self.tris[0][0], f64::INFINITY);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if box_dist2(p, &node.lo, &node.hi) >= best.1 {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    let q = closest_on_triangle(p, &self.tris[t as usize]);
                    let d = (q - p).norm_squared();
                    if d < best.1 {
                        best = (q, d);
                    }
                }
            } else {
                let l = node.left as usize;
                let (dl, dr) = (
                    box_dist2(p, &self.nodes[l].lo, &self.nodes[l].hi),
                    box_dist2(p, &self.nodes[l + 1].lo, &self.nodes[l + 1].hi),
                );
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(l + 1);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(l + 1);
                }
            }
        }
        best
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.closest_point(p).1.sqrt()
    }
}

fn box_dist2(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let mut d = 0.0;
    for k in 0..3 {
        let v = if p[k] < lo[k] {
            lo[k] - p[k]
        } else if p[k] > hi[k] {
            p[k] - hi[k]
        } else {
            0.0
        };
        d += v * v;
    }
    d
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
pub(crate) fn closest_on_triangle(p: &Vec3, t: &[Vec3; 3]) -> Vec3 {
    let (a, b, c) = (t[0], t[1], t[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mesh = primitives::icosphere(2.0, 3);
        let bvh = TriangleBvh::new(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let brute = (0..mesh.face_count())
                .map(|f| (closest_on_triangle(&p, &mesh.face_vertices(f)) - p).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert!((bvh.closest_point(&p).1 - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_regions() {
        let t = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_eq!(closest_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &t), Vec3::zeros());
        assert_eq!(closest_on_triangle(&Vec3::new(0.25, 0.25, 5.0), &t), Vec3::new(0.25, 0.25, 0.0));
        assert_eq!(closest_on_triangle(&Vec3::new(0.5, -2.0, 0.0), &t), Vec3::new(0.5, 0.0, 0.0));
    }
}
