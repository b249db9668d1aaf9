//! Watertight genus-0 primitives: swept tubes along planar polylines and a
//! subdivided star.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{signed_volume, Mesh, Topology};
use crate::Vec3;

/// Output of a shape builder before ground truth is attached.
pub(crate) struct Shape {
    pub mesh: Mesh,
    /// Arc length (tubes) or per-arm parameter used to label vertices.
    pub vertex_arc: Vec<f64>,
}

/// Tube of radius `r` swept along a planar polyline with mitered bends and
/// flat fan caps. `plane_normal` is the normal of the polyline's plane.
///
/// Each straight stretch gets a multiple of four ring intervals; quads are
/// split with diagonals mirrored about the middle of each stretch, so a
/// straight tube is symmetric about its mid-plane.
pub(crate) fn tube(path: &[Vec3], plane_normal: Vec3, r: f64, around: usize, spacing: f64) -> Shape {
    assert!(path.len() >= 2 && around >= 3);
    let e1 = plane_normal.normalize();
    let dirs: Vec<Vec3> = path.windows(2).map(|w| (w[1] - w[0]).normalize()).collect();
    let lens: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let offset = |seg: usize, k: usize| {
        let e2 = dirs[seg].cross(&e1);
        let th = 2.0 * PI * k as f64 / around as f64;
        (e1 * th.cos() + e2 * th.sin()) * r
    };
    // inner-side setback of a miter at bend `b` (between segments b-1 and b)
    let setback = |b: usize| {
        let cos = dirs[b - 1].dot(&dirs[b]).clamp(-1.0, 1.0);
        r * (cos.acos() / 2.0).tan()
    };

    let mut rings: Vec<(Vec<Vec3>, f64)> = Vec::new();
    let mut arc0 = 0.0;
    // (first ring index, last ring index) of each straight stretch
    let mut stretches = Vec::new();
    for s in 0..dirs.len() {
        let sa = if s == 0 { 0.0 } else { setback(s) };
        let sb = if s + 1 == dirs.len() { 0.0 } else { setback(s + 1) };
        let avail = lens[s] - sa - sb;
        assert!(avail > 0.0, "tube segment {s} too short for its bends");
        let n = (((avail / spacing).round() as usize).max(1)).div_ceil(4) * 4;
        let first = rings.len().saturating_sub(1);
        if s == 0 {
            rings.push(((0..around).map(|k| path[0] + offset(0, k)).collect(), 0.0));
        }
        for j in 1..n {
            let t = sa + avail * j as f64 / n as f64;
            let c = path[s] + dirs[s] * t;
            rings.push(((0..around).map(|k| c + offset(s, k)).collect(), arc0 + t));
        }
        if s + 1 == dirs.len() {
            rings.push(((0..around).map(|k| path[s + 1] + offset(s, k)).collect(), arc0 + lens[s]));
        } else {
            let m = (dirs[s] + dirs[s + 1]).normalize();
            let ring = (0..around)
                .map(|k| {
                    let o = offset(s, k);
                    path[s + 1] + o - dirs[s] * (o.dot(&m) / dirs[s].dot(&m))
                })
                .collect();
            rings.push((ring, arc0 + lens[s]));
        }
        stretches.push((first, rings.len() - 1));
        arc0 += lens[s];
    }

    let mut positions = Vec::new();
    let mut arcs = Vec::new();
    for (ring, arc) in &rings {
        positions.extend_from_slice(ring);
        arcs.extend(std::iter::repeat_n(*arc, around));
    }
    let idx = |ring: usize, k: usize| (ring * around + k % around) as u32;
    let mut faces = Vec::new();
    for &(first, last) in &stretches {
        let mid2 = first + last; // twice the middle ring index
        for ring in first..last {
            let mirrored = 2 * ring + 1 > mid2;
            for k in 0..around {
                let (a0, a1, b0, b1) = (idx(ring, k), idx(ring, k + 1), idx(ring + 1, k), idx(ring + 1, k + 1));
                if mirrored {
                    faces.push([a0, a1, b0]);
                    faces.push([a1, b1, b0]);
                } else {
                    faces.push([a0, b1, b0]);
                    faces.push([a0, a1, b1]);
                }
            }
        }
    }
    let last_ring = rings.len() - 1;
    let start = positions.len() as u32;
    positions.push(path[0]);
    arcs.push(0.0);
    positions.push(*path.last().unwrap());
    arcs.push(arc0);
    for k in 0..around {
        faces.push([start, idx(0, k + 1), idx(0, k)]);
        faces.push([start + 1, idx(last_ring, k), idx(last_ring, k + 1)]);
    }
    Shape { mesh: oriented(positions, faces), vertex_arc: arcs }
}

/// Builds a mesh and flips it if its enclosed volume comes out negative.
fn oriented(positions: Vec<Vec3>, mut faces: Vec<[u32; 3]>) -> Mesh {
    let topo = Topology::build(positions.len(), &faces).expect("generated mesh is manifold");
    if signed_volume(&topo, &positions) < 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    Mesh::new(positions, &faces).expect("generated mesh is manifold")
}

/// Polygon mesh used for box modelling before subdivision.
#[derive(Debug, Clone, Default)]
pub(crate) struct PolyMesh {
    pub verts: Vec<Vec3>,
    pub faces: Vec<Vec<u32>>,
}

impl PolyMesh {
    /// Replaces face `f` by an extruded copy moved by `offset`, adding the
    /// side quads.
    pub fn extrude(&mut self, f: usize, offset: Vec3) {
        let old = self.faces[f].clone();
        let base = self.verts.len() as u32;
        for &v in &old {
            self.verts.push(self.verts[v as usize] + offset);
        }
        let n = old.len();
        for i in 0..n {
            let j = (i + 1) % n;
            self.faces.push(vec![old[i], old[j], base + j as u32, base + i as u32]);
        }
        self.faces[f] = (0..n as u32).map(|i| base + i).collect();
    }

    /// One Catmull–Clark step on a closed polygon mesh; the result is all quads.
    pub fn catmull_clark(&self) -> Self {
        let nv = self.verts.len();
        let face_pts: Vec<Vec3> = self
            .faces
            .iter()
            .map(|f| f.iter().map(|&v| self.verts[v as usize]).sum::<Vec3>() / f.len() as f64)
            .collect();
        let mut edge_faces: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut edges: Vec<(u32, u32)> = edge_faces.keys().copied().collect();
        edges.sort_unstable();
        let edge_id: HashMap<(u32, u32), usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let edge_pts: Vec<Vec3> = edges
            .iter()
            .map(|&(a, b)| {
                let fs = &edge_faces[&(a, b)];
                assert_eq!(fs.len(), 2, "catmull-clark needs a closed manifold");
                (self.verts[a as usize] + self.verts[b as usize] + face_pts[fs[0]] + face_pts[fs[1]]) / 4.0
            })
            .collect();

        let mut f_sum = vec![Vec3::zeros(); nv];
        let mut r_sum = vec![Vec3::zeros(); nv];
        let mut valence = vec![0usize; nv];
        let mut face_count = vec![0usize; nv];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                f_sum[v as usize] += face_pts[fi];
                face_count[v as usize] += 1;
            }
        }
        for &(a, b) in &edges {
            let mid = (self.verts[a as usize] + self.verts[b as usize]) / 2.0;
            for v in [a, b] {
                r_sum[v as usize] += mid;
                valence[v as usize] += 1;
            }
        }
        let mut verts: Vec<Vec3> = (0..nv)
            .map(|v| {
                let n = valence[v] as f64;
                let f = f_sum[v] / face_count[v] as f64;
                let r = r_sum[v] / n;
                (f + 2.0 * r + (n - 3.0) * self.verts[v]) / n
            })
            .collect();
        let e_base = verts.len() as u32;
        verts.extend_from_slice(&edge_pts);
        let f_base = verts.len() as u32;
        verts.extend_from_slice(&face_pts);

        let mut faces = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let n = f.len();
            let e = |i: usize| {
                let (a, b) = (f[i % n], f[(i + 1) % n]);
                e_base + edge_id[&(a.min(b), a.max(b))] as u32
            };
            for i in 0..n {
                faces.push(vec![f[i], e(i), f_base + fi as u32, e(i + n - 1)]);
            }
        }
        Self { verts, faces }
    }

    /// Splits quads along their shorter diagonal (fans for larger polygons).
    pub fn triangulate(&self) -> Mesh {
        let mut faces = Vec::new();
        for f in &self.faces {
            if f.len() == 4 {
                let p = |i: usize| self.verts[f[i] as usize];
                if (p(0) - p(2)).norm() <= (p(1) - p(3)).norm() {
                    faces.push([f[0], f[1], f[2]]);
                    faces.push([f[0], f[2], f[3]]);
                } else {
                    faces.push([f[0], f[1], f[3]]);
                    faces.push([f[1], f[2], f[3]]);
                }
            } else {
                for i in 1..f.len() - 1 {
                    faces.push([f[0], f[i], f[i + 1]]);
                }
            }
        }
        oriented(self.verts.clone(), faces)
    }
}

/// Star solid: a `2·arms`-gon prism hub in the `xy` plane with one square
/// arm extruded from every other side face, smoothed by two Catmull–Clark
/// steps. Returns the mesh, the unit arm directions and the hub apothem.
pub(crate) fn star(arms: usize, arm_length: f64, radius: f64) -> (Mesh, Vec<Vec3>, f64) {
    assert!(arms >= 2);
    let sides = 2 * arms;
    let circ = radius / (PI / sides as f64).sin();
    let apothem = circ * (PI / sides as f64).cos();
    let mut pm = PolyMesh::default();
    // corner k sits between side faces k-1 and k
    for z in [-radius, radius] {
        for k in 0..sides {
            let th = 2.0 * PI * (k as f64 - 0.5) / sides as f64;
            pm.verts.push(Vec3::new(circ * th.cos(), circ * th.sin(), z));
        }
    }
    let s = sides as u32;
    for k in 0..s {
        let k1 = (k + 1) % s;
        pm.faces.push(vec![k, k1, s + k1, s + k]);
    }
    pm.faces.push((0..s).rev().collect());
    pm.faces.push((s..2 * s).collect());

    let steps = ((arm_length / (2.0 * radius)).round() as usize).max(1);
    let mut dirs = Vec::new();
    for a in 0..arms {
        let face = 2 * a;
        let th = 2.0 * PI * face as f64 / sides as f64;
        let dir = Vec3::new(th.cos(), th.sin(), 0.0);
        for _ in 0..steps {
            pm.extrude(face, dir * (arm_length / steps as f64));
        }
        dirs.push(dir);
    }
    let smooth = pm.catmull_clark().catmull_clark();
    (smooth.triangulate(), dirs, apothem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_tube_is_closed_and_symmetric() {
        let s = tube(&[Vec3::zeros(), Vec3::new(300.0, 0.0, 0.0)], Vec3::z(), 20.0, 16, 7.5);
        let m = &s.mesh;
        m.require_watertight().unwrap();
        let (v, e, f) = (m.n_vertices() as i64, m.topology().edge_count() as i64, m.n_faces() as i64);
        assert_eq!(v - e + f, 2);
        let vol = signed_volume(m.topology(), m.positions());
        let exact = PI * 400.0 * 300.0;
        assert!(vol > 0.9 * exact && vol < exact);
        // mirror image of every vertex about x = 150 is a vertex
        let key = |p: &Vec3| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64, (p.z * 1e6).round() as i64);
        let set: std::collections::HashSet<_> = m.positions().iter().map(key).collect();
        for p in m.positions() {
            assert!(set.contains(&key(&Vec3::new(300.0 - p.x, p.y, p.z))));
        }
    }

    #[test]
    fn bent_tube_is_closed() {
        let path = [Vec3::zeros(), Vec3::new(100.0, 0.0, 0.0), Vec3::new(100.0, 100.0, 0.0)];
        let s = tube(&path, Vec3::z(), 15.0, 12, 8.0);
        s.mesh.require_watertight().unwrap();
        assert!(signed_volume(s.mesh.topology(), s.mesh.positions()) > 0.0);
    }

    #[test]
    fn star_is_closed_genus_zero() {
        let (m, dirs, _) = star(3, 100.0, 15.0);
        m.require_watertight().unwrap();
        let (v, e, f) = (m.n_vertices() as i64, m.topology().edge_count() as i64, m.n_faces() as i64);
        assert_eq!(v - e + f, 2);
        assert_eq!(dirs.len(), 3);
        assert!(signed_volume(m.topology(), m.positions()) > 0.0);
    }
}
