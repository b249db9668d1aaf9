//! Linear blend skinning, the bidirectional alignment error and
//! articulated registration of a rig to a target point set.

mod io;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Isometry3, Rotation3, Translation3, UnitQuaternion};
use thiserror::Error;

pub use io::{parse_pose, write_pose};

use crate::rigging::{Joint, JointKind, Rig, VertexWeights};
use crate::spatial::KdTree;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Global rigid transform plus one axis-angle rotation (radians) per
/// motion joint. Joints without an entry stay at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
    pub joints: BTreeMap<usize, Vec3>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros(), joints: BTreeMap::new() }
    }

    /// Identity pose with a zero entry for every motion joint of `rig`.
    pub fn rest(rig: &Rig) -> Self {
        let mut p = Self::identity();
        for j in rig.motion_joints() {
            p.joints.insert(j, Vec3::zeros());
        }
        p
    }

    pub fn translated(t: Vec3) -> Self {
        Self { translation: t, ..Self::identity() }
    }

    pub fn global(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(self.translation),
            UnitQuaternion::from_rotation_matrix(&self.rotation),
        )
    }

    pub fn joint_rotation(&self, j: usize) -> Vec3 {
        self.joints.get(&j).copied().unwrap_or_else(Vec3::zeros)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let r = self.rotation.matrix();
        let err = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max();
        if !(err <= 1e-9) || !(r.determinant() - 1.0).abs().le(&1e-9) {
            return Err(PoseError::Invalid(format!("global rotation is not orthonormal (error {err:e})")));
        }
        if !self.translation.iter().all(|v| v.is_finite()) || !self.joints.values().all(|v| v.iter().all(|x| x.is_finite()))
        {
            return Err(PoseError::Invalid("pose has non-finite entries".into()));
        }
        Ok(())
    }
}

/// World transform of every bone, indexed by its joint (`None` for the
/// root). Joint rotations act about the joint's rest position and compose
/// from the root down; bone `c` moves with its parent joint's frame.
pub fn bone_transforms(joints: &[Joint], pose: &Pose) -> Vec<Option<Isometry3<f64>>> {
    let global = pose.global();
    let mut frames: Vec<Isometry3<f64>> = Vec::with_capacity(joints.len());
    for (j, joint) in joints.iter().enumerate() {
        let parent = joint.parent.map_or_else(Isometry3::identity, |p| frames[p]);
        let local = match joint.kind {
            JointKind::Motion => {
                let r = pose.joint_rotation(j);
                if r == Vec3::zeros() {
                    Isometry3::identity()
                } else {
                    Isometry3::rotation_wrt_point(UnitQuaternion::from_scaled_axis(r), joint.position.into())
                }
            }
            _ => Isometry3::identity(),
        };
        frames.push(parent * local);
    }
    joints.iter().map(|j| j.parent.map(|p| global * frames[p])).collect()
}

/// Deforms `positions` by the weighted bone transforms.
pub fn skin(positions: &[Vec3], weights: &[VertexWeights], joints: &[Joint], pose: &Pose) -> Vec<Vec3> {
    let bones = bone_transforms(joints, pose);
    positions
        .iter()
        .zip(weights)
        .map(|(x, row)| {
            let p = nalgebra::Point3::from(*x);
            row.iter().fold(Vec3::zeros(), |acc, &(b, w)| {
                let t = bones[b].expect("weights refer to bone joints");
                acc + (t * p).coords * w
            })
        })
        .collect()
}

/// Linear-blend-skinned vertex positions of `rig` in `pose`.
pub fn lbs_deform(rig: &Rig, pose: &Pose) -> Vec<Vec3> {
    skin(rig.mesh.positions(), &rig.weights, &rig.joints, pose)
}

/// Mean squared nearest-neighbor distance taken in both directions:
/// `(Σ_a d²(v, b) + Σ_b d²(u, a)) / (|a| + |b|)`. Zero for empty input.
pub fn alignment_error_squared(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    let sum_a: f64 = a.iter().map(|v| tb.nearest(v).unwrap().1).sum();
    let sum_b: f64 = b.iter().map(|u| ta.nearest(u).unwrap().1).sum();
    (sum_a + sum_b) / (a.len() + b.len()) as f64
}

/// Root of [`alignment_error_squared`], in millimeters.
pub fn alignment_error(a: &[Vec3], b: &[Vec3]) -> f64 {
    alignment_error_squared(a, b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_outer_iterations: usize,
    /// Cap on damped steps per correspondence update; a round also ends
    /// once its steps stop reducing the objective.
    pub inner_iterations: usize,
    pub initial_damping: f64,
    pub rotation_step: f64,
    pub translation_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 50,
            inner_iterations: 20,
            initial_damping: 1e-3,
            rotation_step: 1e-5,
            translation_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub pose: Pose,
    /// Root-mean alignment error, mm.
    pub error: f64,
    pub outer_iterations: usize,
    /// Objective after every accepted step.
    pub accepted: Vec<f64>,
}

/// Pose parameters: global rotation vector about the rest centroid, global
/// translation, then one rotation vector per motion joint.
struct Params<'a> {
    rig: &'a Rig,
    motion: Vec<usize>,
    centroid: Vec3,
    by_bone: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Params<'_> {
    fn len(&self) -> usize {
        6 + 3 * self.motion.len()
    }

    fn is_rotation(&self, k: usize) -> bool {
        !(3..6).contains(&k)
    }

    fn to_pose(&self, x: &DVector<f64>) -> Pose {
        let rotation = Rotation3::new(Vec3::new(x[0], x[1], x[2]));
        let translation = self.centroid + Vec3::new(x[3], x[4], x[5]) - rotation * self.centroid;
        let joints = self
            .motion
            .iter()
            .enumerate()
            .map(|(i, &j)| (j, Vec3::new(x[6 + 3 * i], x[7 + 3 * i], x[8 + 3 * i])))
            .collect();
        Pose { rotation, translation, joints }
    }

    fn from_pose(&self, pose: &Pose) -> DVector<f64> {
        let mut x = DVector::zeros(self.len());
        let w = pose.rotation.scaled_axis();
        let t = pose.translation - self.centroid + pose.rotation * self.centroid;
        x.rows_mut(0, 3).copy_from(&w);
        x.rows_mut(3, 3).copy_from(&t);
        for (i, &j) in self.motion.iter().enumerate() {
            x.rows_mut(6 + 3 * i, 3).copy_from(&pose.joint_rotation(j));
        }
        x
    }

    fn deform(&self, x: &DVector<f64>) -> Vec<Vec3> {
        lbs_deform(self.rig, &self.to_pose(x))
    }

    /// `(deform(x + h e_k) − deform(x − h e_k)) / 2h`, summed bone by bone
    /// over the bones whose transform parameter `k` actually moves.
    fn central_difference(&self, x: &DVector<f64>, k: usize, h: f64) -> Vec<Vec3> {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[k] += h;
        xm[k] -= h;
        let tp = bone_transforms(&self.rig.joints, &self.to_pose(&xp));
        let tm = bone_transforms(&self.rig.joints, &self.to_pose(&xm));
        let rest = self.rig.mesh.positions();
        let mut d = vec![Vec3::zeros(); rest.len()];
        for (b, members) in &self.by_bone {
            let (Some(p), Some(m)) = (tp[*b], tm[*b]) else { continue };
            if p == m {
                continue;
            }
            let scale = 1.0 / (2.0 * h);
            let dr = (p.rotation.to_rotation_matrix().into_inner() - m.rotation.to_rotation_matrix().into_inner()) * scale;
            let dt = (p.translation.vector - m.translation.vector) * scale;
            for &(i, w) in members {
                d[i] += (dr * rest[i] + dt) * w;
            }
        }
        d
    }
}

/// Skinning weights regrouped per bone: `(bone joint, [(vertex, weight)])`.
fn weights_by_bone(rig: &Rig) -> Vec<(usize, Vec<(usize, f64)>)> {
    let mut map: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, row) in rig.weights.iter().enumerate() {
        for &(b, w) in row {
            map.entry(b).or_default().push((i, w));
        }
    }
    map.into_iter().collect()
}

/// Residuals `model[m] − q` over fixed `(model vertex, target point)` pairs.
fn residuals(model: &[Vec3], pairs: &[(usize, Vec3)]) -> DVector<f64> {
    let mut r = DVector::zeros(3 * pairs.len());
    for (k, (m, q)) in pairs.iter().enumerate() {
        r.rows_mut(3 * k, 3).copy_from(&(model[*m] - q));
    }
    r
}

/// Step halvings tried when a round raises the true alignment error.
const MAX_HALVINGS: usize = 10;

/// Articulated ICP: closest-point pairs in both directions, then damped
/// Gauss-Newton steps with a central-difference Jacobian while the pairs
/// stay fixed. Returns the best pose seen.
pub fn fit_pose(rig: &Rig, target: &[Vec3], init: &Pose, cfg: &FitConfig) -> FitResult {
    let params = Params { rig, motion: rig.motion_joints(), centroid: rig.mesh.centroid(), by_bone: weights_by_bone(rig) };
    let mut x = params.from_pose(init);
    let mut best_pose = params.to_pose(&x);
    let mut model = params.deform(&x);
    let mut best = alignment_error_squared(&model, target);
    let mut accepted = Vec::new();
    if target.is_empty() {
        return FitResult { pose: best_pose, error: 0.0, outer_iterations: 0, accepted };
    }
    let target_tree = KdTree::new(target);
    let n_terms = (model.len() + target.len()) as f64;
    let mut outer = 0;
    let mut stalled = 0;

    while outer < cfg.max_outer_iterations && best > 0.0 {
        outer += 1;
        let model_tree = KdTree::new(&model);
        let mut pairs: Vec<(usize, Vec3)> =
            model.iter().enumerate().map(|(i, v)| (i, target[target_tree.nearest(v).unwrap().0])).collect();
        pairs.extend(target.iter().map(|u| (model_tree.nearest(u).unwrap().0, *u)));
        let mut multiplicity = vec![0usize; model.len()];
        for (m, _) in &pairs {
            multiplicity[*m] += 1;
        }
        let used: Vec<(usize, f64)> =
            multiplicity.iter().enumerate().filter(|(_, &c)| c > 0).map(|(m, &c)| (m, c as f64)).collect();

        let x_start = x.clone();
        let mut damping = cfg.initial_damping;
        let mut r = residuals(&model, &pairs);
        let mut cost = r.norm_squared() / n_terms;
        let mut improved = false;
        for _ in 0..cfg.inner_iterations {
            // pair rows sharing a model vertex share a Jacobian row, so the
            // normal equations are summed per vertex with its multiplicity
            let mut rsum = vec![Vec3::zeros(); model.len()];
            for (row, (m, _)) in pairs.iter().enumerate() {
                rsum[*m] += Vec3::new(r[3 * row], r[3 * row + 1], r[3 * row + 2]);
            }
            let mut jac = DMatrix::zeros(3 * used.len(), params.len());
            let mut jtr = DVector::zeros(params.len());
            for k in 0..params.len() {
                let h = if params.is_rotation(k) { cfg.rotation_step } else { cfg.translation_step };
                let d = params.central_difference(&x, k, h);
                for (row, &(m, c)) in used.iter().enumerate() {
                    let s = c.sqrt();
                    for a in 0..3 {
                        jac[(3 * row + a, k)] = s * d[m][a];
                    }
                    jtr[k] += d[m].dot(&rsum[m]);
                }
            }
            let jtj = jac.tr_mul(&jac);
            let mut step_taken = false;
            let mut converged = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for k in 0..params.len() {
                    a[(k, k)] += damping * jtj[(k, k)].max(1e-12);
                }
                let Some(delta) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                    damping *= 10.0;
                    continue;
                };
                let xn = &x + delta;
                let mn = params.deform(&xn);
                let rn = residuals(&mn, &pairs);
                let cn = rn.norm_squared() / n_terms;
                if cn < cost {
                    damping = (damping * 0.5).max(1e-12);
                    converged = cost - cn <= 1e-12 * cost;
                    (x, model, r, cost) = (xn, mn, rn, cn);
                    accepted.push(cost);
                    step_taken = true;
                    break;
                }
                damping *= 10.0;
            }
            if !step_taken {
                break;
            }
            improved = true;
            if converged {
                break;
            }
        }

        // the pairs were stale: halve back towards the start while the true
        // error is worse than before this round
        let mut err = alignment_error_squared(&model, target);
        let mut halvings = 0;
        while err > best && halvings < MAX_HALVINGS {
            x = &x_start + (&x - &x_start) * 0.5;
            model = params.deform(&x);
            err = alignment_error_squared(&model, target);
            halvings += 1;
        }
        if err > best {
            break;
        }
        let gain = best - err;
        best = err;
        best_pose = params.to_pose(&x);
        stalled = if gain <= 1e-12 * (1.0 + best) { stalled + 1 } else { 0 };
        if !improved || stalled >= 3 {
            break;
        }
    }
    FitResult { pose: best_pose, error: best.sqrt(), outer_iterations: outer, accepted }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_points_five_apart() {
        let a = [Vec3::new(0.0, 0.0, 0.0)];
        let b = [Vec3::new(3.0, 4.0, 0.0)];
        assert_eq!(alignment_error_squared(&a, &b), 25.0);
        assert_eq!(alignment_error(&a, &b), 5.0);
    }

    #[test]
    fn rotated_identity_is_valid() {
        let mut p = Pose::identity();
        p.rotation = Rotation3::new(Vec3::new(0.3, -0.2, 1.0));
        assert!(p.validate().is_ok());
        p.translation.x = f64::NAN;
        assert!(p.validate().is_err());
    }
}
