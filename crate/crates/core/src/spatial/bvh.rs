use crate::Vec3;

const LEAF_SIZE: usize = 8;

/// Barycentric coordinates or ray parameters closer than this to a
/// boundary count as a degenerate (edge, vertex or grazing) hit.
const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: `[start, end)` in `order`. Interior: `left = start`, right child
    /// index in `end`.
    start: usize,
    end: usize,
    leaf: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
    /// The hit lies on a triangle edge/vertex or the ray grazes the plane.
    pub degenerate: bool,
}

/// Bounding volume hierarchy over triangles: binary, longest-axis median
/// split, at most eight triangles per leaf.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn new(positions: &[Vec3], faces: &[[u32; 3]]) -> Self {
        let tris: Vec<[Vec3; 3]> = faces.iter().map(|f| f.map(|i| positions[i as usize])).collect();
        let mut bvh = Self { order: (0..tris.len()).collect(), tris, nodes: Vec::new() };
        if !bvh.tris.is_empty() {
            bvh.build(0, bvh.tris.len());
        }
        bvh
    }

    pub fn n_triangles(&self) -> usize {
        self.tris.len()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            for p in &self.tris[t] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, end, leaf: true });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let ext = hi - lo;
        let axis = ext.imax();
        let mid = start + (end - start) / 2;
        let tris = &self.tris;
        let centroid = |t: usize| tris[t][0][axis] + tris[t][1][axis] + tris[t][2][axis];
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| centroid(a).total_cmp(&centroid(b)).then(a.cmp(&b)));
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        debug_assert_eq!(left, id + 1);
        self.nodes[id] = Node { lo, hi, start: left, end: right, leaf: false };
        id
    }

    /// Visits every triangle whose subtree box passes `keep`.
    fn visit(&self, keep: impl Fn(&Vec3, &Vec3) -> bool, mut f: impl FnMut(usize) -> bool) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !keep(&node.lo, &node.hi) {
                continue;
            }
            if node.leaf {
                for &t in &self.order[node.start..node.end] {
                    if !f(t) {
                        return;
                    }
                }
            } else {
                stack.push(node.end);
                stack.push(node.start);
            }
        }
    }

    /// All intersections of the ray `origin + t·dir`, `t > 0`, sorted by `t`
    /// then face.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3) -> Vec<RayHit> {
        let mut hits = Vec::new();
        self.visit(
            |lo, hi| slab(origin, dir, lo, hi, f64::INFINITY),
            |t| {
                if let Some(h) = intersect(origin, dir, &self.tris[t]) {
                    if h.0 > 0.0 || (h.1 && h.0 > -DEGENERATE_EPS) {
                        hits.push(RayHit { t: h.0, face: t, degenerate: h.1 || h.0 < DEGENERATE_EPS });
                    }
                }
                true
            },
        );
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
        hits
    }

    /// First triangle (lowest index among hits found) crossed by the closed
    /// segment `a–b`, if any.
    pub fn segment_hit(&self, a: &Vec3, b: &Vec3) -> Option<usize> {
        let dir = b - a;
        let mut found: Option<usize> = None;
        self.visit(
            |lo, hi| slab(a, &dir, lo, hi, 1.0),
            |t| {
                if let Some((s, _)) = intersect(a, &dir, &self.tris[t]) {
                    if (0.0..=1.0).contains(&s) {
                        found = Some(found.map_or(t, |f| f.min(t)));
                    }
                }
                true
            },
        );
        found
    }
}

/// Ray/box overlap for `t ∈ [0, t_max]`.
fn slab(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3, t_max: f64) -> bool {
    let (mut t0, mut t1) = (0.0f64, t_max);
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut a, mut b) = ((lo[k] - o[k]) * inv, (hi[k] - o[k]) * inv);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        // widen slightly so hits on box faces are not lost to rounding
        let pad = 1e-9 * (1.0 + a.abs().max(b.abs()));
        t0 = t0.max(a - pad);
        t1 = t1.min(b + pad);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Möller–Trumbore; returns the ray parameter and a degeneracy flag.
fn intersect(o: &Vec3, d: &Vec3, tri: &[Vec3; 3]) -> Option<(f64, bool)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm() * d.norm();
    if scale == 0.0 {
        return None;
    }
    if det.abs() <= DEGENERATE_EPS * scale {
        // ray parallel to the plane; only a coplanar ray can touch it
        let n = e1.cross(&e2);
        let coplanar = n.dot(&(o - tri[0])).abs() <= DEGENERATE_EPS * n.norm() * (1.0 + (o - tri[0]).norm());
        return coplanar.then_some((0.0, true));
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    let eps = DEGENERATE_EPS;
    if u < -eps || v < -eps || u + v > 1.0 + eps {
        return None;
    }
    let t = e2.dot(&q) * inv;
    let degenerate = u < eps || v < eps || u + v > 1.0 - eps;
    Some((t, degenerate))
}
