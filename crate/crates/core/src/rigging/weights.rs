use super::{bones_of, Joint, RigError};
use crate::linalg::{SparseCholesky, SparseMatrix};
use crate::mesh::{cotangent_stiffness, voronoi_areas, Mesh};
use crate::spatial::{closest_on_segment, InsideTest};
use crate::{Exec, Vec3};

/// Sparse skinning weights of one vertex: `(bone joint, weight)` pairs with
/// positive weights summing to one, sorted by joint.
pub type VertexWeights = Vec<(usize, f64)>;

/// Heat constant multiplying `1/d²`.
const HEAT_SCALE: f64 = 1.0;
/// Samples along a vertex-to-bone segment for the visibility test.
const VISIBILITY_SAMPLES: usize = 8;
/// Relative slack under which two bones count as equally near.
const TIE_SLACK: f64 = 1e-9;

/// Bone-heat skinning weights.
///
/// Each bone's weights solve `(K + A H) w = A H p`, the area-weighted form
/// of `(L + H) w = H p`: `K` is the cotangent stiffness, `A` the vertex
/// areas, `H_ii = 1/d_i²` for the distance to the nearest bone visible from
/// vertex `i` from inside the mesh, and `p_i = 1` where that bone is the
/// current one. Negative results are clamped and rows renormalized.
pub fn bone_heat_weights(
    mesh: &Mesh,
    joints: &[Joint],
    inside: &InsideTest,
    exec: Exec,
) -> Result<Vec<VertexWeights>, RigError> {
    let bones = bones_of(joints);
    if bones.is_empty() {
        return Err(RigError::Invalid("rig has no bones".into()));
    }
    let segs: Vec<(Vec3, Vec3)> = bones
        .iter()
        .map(|&b| (joints[joints[b].parent.unwrap()].position, joints[b].position))
        .collect();
    let n = mesh.n_vertices();

    // nearest visible bones per vertex
    let attach: Vec<(f64, Vec<usize>)> = exec.map_range(n, |i| {
        let v = mesh.positions()[i];
        let mut order: Vec<(f64, usize, Vec3)> = segs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let (q, _) = closest_on_segment(&v, a, b);
                ((q - v).norm(), k, q)
            })
            .collect();
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let visible = |q: &Vec3| inside.segment_inside(&v, q, VISIBILITY_SAMPLES);
        let Some(first) = order.iter().position(|(_, _, q)| visible(q)) else {
            return (0.0, Vec::new());
        };
        let d = order[first].0.max(1e-9);
        let near: Vec<usize> = order[first..]
            .iter()
            .take_while(|(e, _, _)| *e <= d * (1.0 + TIE_SLACK))
            .filter(|(_, _, q)| visible(q))
            .map(|&(_, k, _)| k)
            .collect();
        (HEAT_SCALE / (d * d), near)
    });

    let areas = voronoi_areas(mesh);
    let ah: Vec<f64> = (0..n).map(|i| areas[i] * attach[i].0).collect();
    let k = cotangent_stiffness(mesh.topology(), mesh.positions());
    let system = k.add_scaled(&SparseMatrix::diagonal(&ah), 1.0);
    let chol = SparseCholesky::factor(&system)?;

    let columns: Vec<Vec<f64>> = exec.map_range(bones.len(), |b| {
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let near = &attach[i].1;
                if near.contains(&b) {
                    ah[i] / near.len() as f64
                } else {
                    0.0
                }
            })
            .collect();
        chol.solve(&rhs)
    });

    Ok((0..n)
        .map(|i| {
            let mut row: VertexWeights =
                (0..bones.len()).filter(|&b| columns[b][i] > 0.0).map(|b| (bones[b], columns[b][i])).collect();
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if sum > 0.0 && sum.is_finite() {
                row.iter_mut().for_each(|e| e.1 /= sum);
                row
            } else {
                let v = mesh.positions()[i];
                let nearest = (0..segs.len())
                    .min_by(|&x, &y| {
                        let dx = (closest_on_segment(&v, &segs[x].0, &segs[x].1).0 - v).norm();
                        let dy = (closest_on_segment(&v, &segs[y].0, &segs[y].1).0 - v).norm();
                        dx.total_cmp(&dy)
                    })
                    .unwrap();
                vec![(bones[nearest], 1.0)]
            }
        })
        .collect())
}
