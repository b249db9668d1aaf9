use super::{Mesh, MeshError, Topology};
use crate::linalg::SparseMatrix;
use crate::Vec3;

/// Cotangents are clamped to `[-COT_CLAMP, COT_CLAMP]`, i.e. angles are kept
/// at least one degree away from 0° and 180°.
pub const COT_CLAMP: f64 = 57.289_961_630_759_42; // cot(1°)

pub fn face_area(mesh: &Mesh, f: usize) -> f64 {
    let [a, b, c] = mesh.faces()[f];
    let p = mesh.positions();
    tri_area(p[a as usize], p[b as usize], p[c as usize])
}

fn tri_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Half the summed areas of the triangles incident to vertex `i`.
pub fn voronoi_area(mesh: &Mesh, i: usize) -> f64 {
    0.5 * mesh
        .topology()
        .vertex_faces(i)
        .into_iter()
        .map(|f| face_area(mesh, f as usize))
        .sum::<f64>()
}

/// [`voronoi_area`] for every vertex, accumulated face by face.
pub fn voronoi_areas(mesh: &Mesh) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.n_vertices()];
    for f in 0..mesh.n_faces() {
        let a = 0.5 * face_area(mesh, f);
        for &v in &mesh.faces()[f] {
            areas[v as usize] += a;
        }
    }
    areas
}

pub fn mean_edge_length(mesh: &Mesh) -> f64 {
    let p = mesh.positions();
    let t = mesh.topology();
    let (sum, count) = t
        .edges()
        .fold((0.0, 0usize), |(s, c), (a, b)| (s + (p[a as usize] - p[b as usize]).norm(), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Enclosed volume by the signed tetrahedron sum; positive for a closed,
/// outward-oriented mesh.
pub fn signed_volume(topology: &Topology, positions: &[Vec3]) -> f64 {
    topology
        .faces()
        .iter()
        .map(|&[a, b, c]| {
            positions[a as usize].dot(&positions[b as usize].cross(&positions[c as usize]))
        })
        .sum::<f64>()
        / 6.0
}

fn clamped_cot(u: Vec3, v: Vec3) -> f64 {
    let cross = u.cross(&v).norm();
    let dot = u.dot(&v);
    let cot = dot / cross;
    if cot.is_nan() {
        0.0
    } else {
        cot.clamp(-COT_CLAMP, COT_CLAMP)
    }
}

/// Sum of the clamped cotangents opposite each edge, as `(a, b, cot_sum)`
/// triplets with `a < b`, one entry per incident face.
fn edge_cotangents(topology: &Topology, positions: &[Vec3]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(topology.faces().len() * 3);
    for tri in topology.faces() {
        for k in 0..3 {
            let (i, j, o) = (tri[k] as usize, tri[(k + 1) % 3] as usize, tri[(k + 2) % 3] as usize);
            let cot = clamped_cot(positions[i] - positions[o], positions[j] - positions[o]);
            out.push((i.min(j), i.max(j), cot));
        }
    }
    out
}

/// Symmetric cotangent stiffness matrix `K` with `K_ij = −½ Σ cot`,
/// `K_ii = −Σ_j K_ij`. Tolerates degenerate triangles (their clamped or
/// zeroed cotangents keep the matrix finite).
pub fn cotangent_stiffness(topology: &Topology, positions: &[Vec3]) -> SparseMatrix {
    let mut t = Vec::with_capacity(topology.faces().len() * 12);
    for (a, b, cot) in edge_cotangents(topology, positions) {
        let w = 0.5 * cot;
        t.extend([(a, b, -w), (b, a, -w), (a, a, w), (b, b, w)]);
    }
    let n = topology.n_vertices();
    SparseMatrix::from_triplets(n, n, &t)
}

/// Area-normalized cotangent Laplacian
/// `L_ij = −(cot α + cot β)/(2|A_i|)`, `L_ii = −Σ_j L_ij`.
///
/// With this sign convention `L` is positive semi-definite-like (it
/// approximates `−Δ`), and `L · 1 = 0`.
#[derive(Debug, Clone)]
pub struct SparseLaplacian {
    matrix: SparseMatrix,
}

impl SparseLaplacian {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    /// `L` applied to each coordinate of a per-vertex field.
    pub fn apply(&self, field: &[Vec3]) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); field.len()];
        for c in 0..self.matrix.n_cols() {
            let f = field[c];
            for (r, v) in self.matrix.col(c) {
                out[r] += v * f;
            }
        }
        out
    }
}

pub fn cotangent_laplacian(mesh: &Mesh) -> Result<SparseLaplacian, MeshError> {
    for f in 0..mesh.n_faces() {
        let area = face_area(mesh, f);
        if !(area > 0.0) {
            return Err(MeshError::DegenerateGeometry(format!("face {f} has area {area}")));
        }
    }
    let areas = voronoi_areas(mesh);
    let mut t = Vec::with_capacity(mesh.n_faces() * 12);
    for (a, b, cot) in edge_cotangents(mesh.topology(), mesh.positions()) {
        let wa = cot / (2.0 * areas[a]);
        let wb = cot / (2.0 * areas[b]);
        t.extend([(a, b, -wa), (a, a, wa), (b, a, -wb), (b, b, wb)]);
    }
    let n = mesh.n_vertices();
    Ok(SparseLaplacian { matrix: SparseMatrix::from_triplets(n, n, &t) })
}
