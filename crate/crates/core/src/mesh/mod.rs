//! Halfedge triangle mesh with vertex normals.
//!
//! Connectivity lives in a shared [`Topology`]; a [`Mesh`] pairs it with one
//! set of vertex positions. Deforming a mesh produces a new `Mesh` that shares
//! the same topology, so the tracker can emit one mesh per frame cheaply.

mod geometry;
pub mod io;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::Vec3;

pub use geometry::{
    cotangent_laplacian, cotangent_stiffness, face_area, mean_edge_length, signed_volume,
    voronoi_area, voronoi_areas, SparseLaplacian, COT_CLAMP,
};
pub use io::{load_mesh, save_mesh, PlyData};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("face {face} repeats a vertex index")]
    DegenerateFace { face: usize },
    #[error("edge ({a}, {b}) is shared by more than two faces")]
    NonManifoldEdge { a: u32, b: u32 },
    #[error("edge ({a}, {b}) appears twice with the same direction (inconsistent face orientation)")]
    InconsistentOrientation { a: u32, b: u32 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("mesh is not watertight ({0} boundary halfedges)")]
    NotWatertight(usize),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unsupported primitive at {location}: {message}")]
    UnsupportedPrimitive { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One directed edge of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfEdge {
    pub origin: u32,
    pub next: u32,
    pub twin: Option<u32>,
    pub face: u32,
}

/// Halfedge connectivity of a triangle mesh.
///
/// Halfedge `3f + k` runs from corner `k` to corner `k + 1` of face `f`.
#[derive(Debug, Clone)]
pub struct Topology {
    n_vertices: usize,
    faces: Vec<[u32; 3]>,
    halfedges: Vec<HalfEdge>,
    vertex_out: Vec<Option<u32>>,
    boundary_halfedges: usize,
    adj_offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl Topology {
    pub fn build(n_vertices: usize, faces: &[[u32; 3]]) -> Result<Self, MeshError> {
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v as usize >= n_vertices {
                    return Err(MeshError::IndexOutOfRange { face: f, index: v, count: n_vertices });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }

        let mut undirected: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 2);
        for tri in faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let c = undirected.entry((a.min(b), a.max(b))).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(MeshError::NonManifoldEdge { a: a.min(b), b: a.max(b) });
                }
            }
        }

        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3);
        let mut halfedges = Vec::with_capacity(faces.len() * 3);
        for (f, tri) in faces.iter().enumerate() {
            for k in 0..3 {
                let h = (3 * f + k) as u32;
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if directed.insert((a, b), h).is_some() {
                    return Err(MeshError::InconsistentOrientation { a, b });
                }
                halfedges.push(HalfEdge {
                    origin: a,
                    next: (3 * f + (k + 1) % 3) as u32,
                    twin: None,
                    face: f as u32,
                });
            }
        }
        let mut boundary_halfedges = 0;
        for (h, he) in halfedges.iter_mut().enumerate() {
            let dest = faces[h / 3][(h % 3 + 1) % 3];
            he.twin = directed.get(&(dest, he.origin)).copied();
            if he.twin.is_none() {
                boundary_halfedges += 1;
            }
        }

        // Prefer a boundary halfedge as the start of each vertex fan so that
        // rotation covers every incident face of a boundary vertex.
        let mut vertex_out: Vec<Option<u32>> = vec![None; n_vertices];
        for (h, he) in halfedges.iter().enumerate() {
            let slot = &mut vertex_out[he.origin as usize];
            match slot {
                None => *slot = Some(h as u32),
                Some(cur) if halfedges[*cur as usize].twin.is_some() && he.twin.is_none() => {
                    *slot = Some(h as u32)
                }
                _ => {}
            }
        }

        let mut neighbor_sets: Vec<Vec<u32>> = vec![Vec::new(); n_vertices];
        for tri in faces {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                neighbor_sets[a as usize].push(b);
                neighbor_sets[b as usize].push(a);
            }
        }
        let mut adj_offsets = Vec::with_capacity(n_vertices + 1);
        let mut adj = Vec::new();
        adj_offsets.push(0);
        for mut set in neighbor_sets {
            set.sort_unstable();
            set.dedup();
            adj.extend_from_slice(&set);
            adj_offsets.push(adj.len());
        }

        Ok(Self {
            n_vertices,
            faces: faces.to_vec(),
            halfedges,
            vertex_out,
            boundary_halfedges,
            adj_offsets,
            adj,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn halfedges(&self) -> &[HalfEdge] {
        &self.halfedges
    }

    pub fn halfedge(&self, h: u32) -> &HalfEdge {
        &self.halfedges[h as usize]
    }

    /// Destination vertex of halfedge `h`.
    pub fn dest(&self, h: u32) -> u32 {
        self.halfedges[self.halfedges[h as usize].next as usize].origin
    }

    pub fn prev(&self, h: u32) -> u32 {
        let n = self.halfedges[h as usize].next;
        self.halfedges[n as usize].next
    }

    pub fn boundary_halfedge_count(&self) -> usize {
        self.boundary_halfedges
    }

    pub fn is_watertight(&self) -> bool {
        self.boundary_halfedges == 0
    }

    /// Sorted one-ring neighbors of vertex `v`.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_vertices).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .filter(move |&&b| b as usize > a)
                .map(move |&b| (a as u32, b))
        })
    }

    /// Outgoing halfedges of `v`, obtained by rotating around the vertex fan.
    pub fn outgoing(&self, v: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let Some(start) = self.vertex_out[v] else {
            return out;
        };
        let mut h = start;
        loop {
            out.push(h);
            match self.halfedges[self.prev(h) as usize].twin {
                Some(t) if t != start => h = t,
                _ => break,
            }
            if out.len() > self.halfedges.len() {
                break;
            }
        }
        out
    }

    /// Faces incident to `v`, via halfedge rotation.
    pub fn vertex_faces(&self, v: usize) -> Vec<u32> {
        self.outgoing(v)
            .into_iter()
            .map(|h| self.halfedges[h as usize].face)
            .collect()
    }

    /// Connected components of the vertex-edge graph; returns a component id
    /// per vertex and the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n_vertices];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n_vertices {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in self.neighbors(v) {
                    if comp[w as usize] == usize::MAX {
                        comp[w as usize] = count;
                        stack.push(w as usize);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

/// Triangle mesh: shared topology plus per-vertex positions and unit normals.
#[derive(Debug, Clone)]
pub struct Mesh {
    topology: Arc<Topology>,
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
}

impl Mesh {
    /// Builds halfedge connectivity and area-weighted vertex normals.
    pub fn new(positions: Vec<Vec3>, faces: &[[u32; 3]]) -> Result<Self, MeshError> {
        let topology = Arc::new(Topology::build(positions.len(), faces)?);
        Ok(Self::from_topology(topology, positions))
    }

    pub fn from_topology(topology: Arc<Topology>, positions: Vec<Vec3>) -> Self {
        assert_eq!(topology.n_vertices(), positions.len());
        let normals = vertex_normals(&topology, &positions);
        Self { topology, positions, normals }
    }

    /// Same connectivity, new positions; normals are recomputed.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Self {
        Self::from_topology(Arc::clone(&self.topology), positions)
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        self.topology.faces()
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_faces(&self) -> usize {
        self.topology.faces().len()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces()[f];
        let (pa, pb, pc) = (
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        );
        (pb - pa).cross(&(pc - pa)).normalize()
    }

    pub fn centroid(&self) -> Vec3 {
        let sum: Vec3 = self.positions.iter().sum();
        sum / self.positions.len().max(1) as f64
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds(&self.positions)
    }

    /// Error unless the mesh is closed.
    pub fn require_watertight(&self) -> Result<(), MeshError> {
        if self.topology.is_watertight() {
            Ok(())
        } else {
            Err(MeshError::NotWatertight(self.topology.boundary_halfedge_count()))
        }
    }

    /// Mesh with every face orientation reversed.
    pub fn flipped(&self) -> Result<Self, MeshError> {
        let faces: Vec<[u32; 3]> = self.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
        Self::new(self.positions.clone(), &faces)
    }
}

pub fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn vertex_normals(topology: &Topology, positions: &[Vec3]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); positions.len()];
    for &[a, b, c] in topology.faces() {
        let (pa, pb, pc) = (positions[a as usize], positions[b as usize], positions[c as usize]);
        // |cross| is twice the triangle area, which gives the area weighting.
        let n = (pb - pa).cross(&(pc - pa));
        acc[a as usize] += n;
        acc[b as usize] += n;
        acc[c as usize] += n;
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn tetrahedron() -> Mesh {
        let p = vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ];
        let faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
        Mesh::new(p, &faces).unwrap()
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            &[[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(m.topology().boundary_halfedge_count(), 3);
        for n in m.normals() {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn tetrahedron_is_closed_genus_zero() {
        let m = tetrahedron();
        let t = m.topology();
        assert!(t.is_watertight());
        let euler = t.n_vertices() as i64 - t.edge_count() as i64 + m.n_faces() as i64;
        assert_eq!(euler, 2);
        for n in m.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
        // outward normals on a centered tetrahedron point away from the origin
        for (p, n) in m.positions().iter().zip(m.normals()) {
            assert!(p.dot(n) > 0.0);
        }
        for h in 0..t.halfedges().len() as u32 {
            let he = t.halfedge(h);
            assert_eq!(t.halfedge(t.halfedge(he.next).next).next, h);
            let tw = he.twin.unwrap();
            assert_eq!(t.halfedge(tw).twin, Some(h));
        }
    }

    #[test]
    fn opposite_orientation_is_rejected() {
        let p = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        // both faces contain the directed edge 1 -> 2
        let err = Mesh::new(p, &[[0, 1, 2], [1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::InconsistentOrientation { a: 1, b: 2 }));
    }

    #[test]
    fn non_manifold_and_degenerate_faces_are_rejected() {
        let p = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), Vec3::repeat(1.0)];
        let err = Mesh::new(p.clone(), &[[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { .. }));
        let err = Mesh::new(p.clone(), &[[0, 1, 1]]).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFace { face: 0 }));
        let err = Mesh::new(p, &[[0, 1, 9]]).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 9, .. }));
    }

    #[test]
    fn flipping_faces_flips_normals() {
        let m = tetrahedron();
        let f = m.flipped().unwrap();
        for (a, b) in m.normals().iter().zip(f.normals()) {
            assert!((a + b).norm() < 1e-12);
        }
    }
}
