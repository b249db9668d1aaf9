//! Articulated ground truth: parametric primitives with known joints and
//! parts, keyframed animation, single-view depth rendering and sensor noise.

mod scenario;
mod shapes;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use scenario::{Dataset, Scenario, ScenarioError, Truth};

use crate::raster::{rasterize, DepthBuffer};
use crate::tracking::{Frame, PointCloud};
use crate::{Camera, Mesh, Vec3};

/// Width of the linear blend between neighboring parts, mm.
pub const BLEND_BAND: f64 = 5.0;
/// Default depth jump that marks a discontinuity pixel, mm.
pub const DISCONTINUITY_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveKind {
    /// Straight tube along `+x` from the origin with joints at the given
    /// fractions of its length.
    Pipe { length: f64, radius: f64, joint_fractions: Vec<f64> },
    /// Arms in the `xy` plane around a hub at the origin, one joint per arm base.
    Star { arms: usize, arm_length: f64, radius: f64 },
    /// Three-segment tube zig-zagging in the `xy` plane with a joint at each bend.
    Lamp { segment_lengths: [f64; 3], radius: f64 },
    /// Tube along an arbitrary planar polyline with joints at the given arc lengths.
    Polyline { path: Vec<Vec3>, radius: f64, joint_arcs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSpec {
    pub kind: PrimitiveKind,
    /// Vertices per cross-section ring.
    pub around: usize,
    /// Target ring spacing along tubes, mm.
    pub spacing: f64,
}

impl PrimitiveSpec {
    pub fn pipe(length: f64, radius: f64, joint_fractions: &[f64]) -> Self {
        Self {
            kind: PrimitiveKind::Pipe { length, radius, joint_fractions: joint_fractions.to_vec() },
            around: 16,
            spacing: 7.5,
        }
    }

    pub fn star(arms: usize, arm_length: f64, radius: f64) -> Self {
        Self { kind: PrimitiveKind::Star { arms, arm_length, radius }, around: 16, spacing: 7.5 }
    }

    pub fn lamp(segment_lengths: [f64; 3], radius: f64) -> Self {
        Self { kind: PrimitiveKind::Lamp { segment_lengths, radius }, around: 16, spacing: 7.5 }
    }

    pub fn with_tessellation(mut self, around: usize, spacing: f64) -> Self {
        self.around = around;
        self.spacing = spacing;
        self
    }
}

/// Revolute joint between two rigid parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueJoint {
    pub position: Vec3,
    /// Unit rotation axis.
    pub axis: Vec3,
    /// Unit normal of the plane separating the parts, pointing into the child.
    pub boundary_normal: Vec3,
    pub parent_part: usize,
    pub child_part: usize,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub mesh: Mesh,
    /// Ordered so that every joint's parent part is posed before its child.
    pub joints: Vec<TrueJoint>,
    /// Rigid part of every vertex.
    pub labels: Vec<usize>,
    pub n_parts: usize,
    /// Characteristic thickness, used to bound the blend region around joints.
    pub radius: f64,
    /// `(joint, child weight)` for vertices inside a blend band.
    blend: Vec<Option<(usize, f64)>>,
}

pub fn make_primitive(spec: &PrimitiveSpec) -> GroundTruth {
    match &spec.kind {
        PrimitiveKind::Pipe { length, radius, joint_fractions } => {
            let path = vec![Vec3::zeros(), Vec3::new(*length, 0.0, 0.0)];
            let arcs: Vec<f64> = joint_fractions.iter().map(|f| f * length).collect();
            tube_truth(&path, *radius, &arcs, spec)
        }
        PrimitiveKind::Lamp { segment_lengths: [a, b, c], radius } => {
            let p1 = Vec3::new(*a, 0.0, 0.0);
            let p2 = p1 + Vec3::new(60f64.to_radians().cos(), 60f64.to_radians().sin(), 0.0) * *b;
            let p3 = p2 + Vec3::new(30f64.to_radians().cos(), -(30f64.to_radians().sin()), 0.0) * *c;
            tube_truth(&[Vec3::zeros(), p1, p2, p3], *radius, &[*a, a + b], spec)
        }
        PrimitiveKind::Polyline { path, radius, joint_arcs } => tube_truth(path, *radius, joint_arcs, spec),
        PrimitiveKind::Star { arms, arm_length, radius } => {
            let (mesh, dirs, apothem) = shapes::star(*arms, *arm_length, *radius);
            let joints: Vec<TrueJoint> = dirs
                .iter()
                .enumerate()
                .map(|(a, d)| TrueJoint {
                    position: d * apothem,
                    axis: Vec3::z(),
                    boundary_normal: *d,
                    parent_part: 0,
                    child_part: a + 1,
                })
                .collect();
            let labels = mesh
                .positions()
                .iter()
                .map(|p| {
                    joints
                        .iter()
                        .find(|j| (p - j.position).dot(&j.boundary_normal) >= 0.0)
                        .map_or(0, |j| j.child_part)
                })
                .collect();
            finish(mesh, joints, labels, *radius)
        }
    }
}

fn tube_truth(path: &[Vec3], radius: f64, joint_arcs: &[f64], spec: &PrimitiveSpec) -> GroundTruth {
    let normal = plane_normal(path);
    let shape = shapes::tube(path, normal, radius, spec.around, spec.spacing);
    let mut bend_arcs = Vec::new();
    let mut acc = 0.0;
    for w in path.windows(2) {
        acc += (w[1] - w[0]).norm();
        bend_arcs.push(acc);
    }
    let mut sorted = joint_arcs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let joints = sorted
        .iter()
        .enumerate()
        .map(|(j, &arc)| {
            let (position, tangent_in, tangent_out) = point_at_arc(path, arc);
            let at_bend = bend_arcs.iter().any(|b| (b - arc).abs() < 1e-9);
            let boundary_normal = if at_bend { (tangent_in + tangent_out).normalize() } else { tangent_out };
            TrueJoint { position, axis: normal, boundary_normal, parent_part: j, child_part: j + 1 }
        })
        .collect();
    let labels =
        shape.vertex_arc.iter().map(|&a| sorted.iter().filter(|&&j| j <= a + 1e-9).count()).collect();
    finish(shape.mesh, joints, labels, radius)
}

fn plane_normal(path: &[Vec3]) -> Vec3 {
    for w in path.windows(3) {
        let n = (w[1] - w[0]).cross(&(w[2] - w[1]));
        if n.norm() > 1e-9 {
            return n.normalize();
        }
    }
    let d = (path[1] - path[0]).normalize();
    let n = d.cross(&Vec3::z());
    if n.norm() > 1e-9 {
        Vec3::z()
    } else {
        d.cross(&Vec3::x()).normalize()
    }
}

/// Point at arc length `arc` plus incoming and outgoing tangents.
fn point_at_arc(path: &[Vec3], arc: f64) -> (Vec3, Vec3, Vec3) {
    let mut acc = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let len = (w[1] - w[0]).norm();
        let d = (w[1] - w[0]) / len;
        if arc <= acc + len + 1e-9 {
            let t = (arc - acc).min(len);
            if (t - len).abs() < 1e-9 && i + 2 < path.len() {
                let next = (path[i + 2] - path[i + 1]).normalize();
                return (w[1], d, next);
            }
            return (w[0] + d * t, d, d);
        }
        acc += len;
    }
    let n = path.len();
    let d = (path[n - 1] - path[n - 2]).normalize();
    (path[n - 1], d, d)
}

fn finish(mesh: Mesh, joints: Vec<TrueJoint>, labels: Vec<usize>, radius: f64) -> GroundTruth {
    let half = BLEND_BAND / 2.0;
    let blend = mesh
        .positions()
        .iter()
        .zip(&labels)
        .map(|(p, &l)| {
            joints.iter().enumerate().find_map(|(j, jt)| {
                let s = (p - jt.position).dot(&jt.boundary_normal);
                let near = (p - jt.position).norm() <= 3.0 * radius;
                (near && s.abs() < half && (l == jt.parent_part || l == jt.child_part))
                    .then(|| (j, (0.5 + s / BLEND_BAND).clamp(0.0, 1.0)))
            })
        })
        .collect();
    let n_parts = joints.len() + 1;
    GroundTruth { mesh, joints, labels, n_parts, radius, blend }
}

impl GroundTruth {
    /// Rebuilds ground truth from a template and its stored truth record.
    pub fn from_truth(template: Mesh, truth: &Truth) -> Result<Self, ScenarioError> {
        if truth.labels.len() != template.n_vertices() {
            return Err(ScenarioError::Dataset(format!(
                "truth has {} labels for {} vertices",
                truth.labels.len(),
                template.n_vertices()
            )));
        }
        if truth.joints.len() + 1 != truth.n_parts
            || truth.labels.iter().any(|&l| l >= truth.n_parts)
            || truth.joints.iter().any(|j| j.parent_part >= truth.n_parts || j.child_part >= truth.n_parts)
        {
            return Err(ScenarioError::Dataset("truth joints and part labels disagree".into()));
        }
        Ok(finish(template, truth.joints.clone(), truth.labels.clone(), truth.radius))
    }

    /// Rigid transform of every part for joint angles in degrees.
    pub fn part_transforms(&self, angles_deg: &[f64]) -> Vec<Isometry3<f64>> {
        let mut tf = vec![Isometry3::identity(); self.n_parts];
        for (j, jt) in self.joints.iter().enumerate() {
            let angle = angles_deg.get(j).copied().unwrap_or(0.0).to_radians();
            let rot = rotation_about(&jt.position, &jt.axis, angle);
            tf[jt.child_part] = tf[jt.parent_part] * rot;
        }
        tf
    }

    /// Joint positions after posing.
    pub fn posed_joints(&self, angles_deg: &[f64], translation: &Vec3) -> Vec<Vec3> {
        let tf = self.part_transforms(angles_deg);
        self.joints
            .iter()
            .map(|j| tf[j.parent_part].transform_point(&j.position.into()).coords + translation)
            .collect()
    }

    /// Rest vertices posed by hard part transforms blended across the band.
    pub fn pose_positions(&self, angles_deg: &[f64], translation: &Vec3) -> Vec<Vec3> {
        let tf = self.part_transforms(angles_deg);
        self.mesh
            .positions()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let pt = (*p).into();
                let moved = match self.blend[i] {
                    Some((j, w)) => {
                        let jt = &self.joints[j];
                        let a = tf[jt.parent_part].transform_point(&pt).coords;
                        let b = tf[jt.child_part].transform_point(&pt).coords;
                        a * (1.0 - w) + b * w
                    }
                    None => tf[self.labels[i]].transform_point(&pt).coords,
                };
                moved + translation
            })
            .collect()
    }

    pub fn posed_mesh(&self, angles_deg: &[f64], translation: &Vec3) -> Mesh {
        self.mesh.with_positions(self.pose_positions(angles_deg, translation))
    }

    /// Vertices whose blend weight is not exactly 0 or 1.
    pub fn blended_vertices(&self) -> usize {
        self.blend.iter().filter(|b| b.is_some_and(|(_, w)| w > 0.0 && w < 1.0)).count()
    }
}

fn rotation_about(center: &Vec3, axis: &Vec3, angle: f64) -> Isometry3<f64> {
    let rot = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
    Translation3::from(*center) * rot * Translation3::from(-center)
}

/// Piecewise-linear keyframed scalar; constant beyond the first/last key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// `(frame, value)` pairs sorted by frame.
    pub keys: Vec<(f64, f64)>,
}

impl Curve {
    pub fn constant(v: f64) -> Self {
        Self { keys: vec![(0.0, v)] }
    }

    pub fn linear(f0: f64, v0: f64, f1: f64, v1: f64) -> Self {
        Self { keys: vec![(f0, v0), (f1, v1)] }
    }

    pub fn value(&self, frame: f64) -> f64 {
        let Some(first) = self.keys.first() else { return 0.0 };
        if frame <= first.0 {
            return first.1;
        }
        for w in self.keys.windows(2) {
            let ((f0, v0), (f1, v1)) = (w[0], w[1]);
            if frame <= f1 {
                return if f1 > f0 { v0 + (v1 - v0) * (frame - f0) / (f1 - f0) } else { v1 };
            }
        }
        self.keys.last().unwrap().1
    }
}

/// Per-joint angle curves (degrees) and a global translation curve (mm).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Animation {
    pub joints: Vec<Curve>,
    pub translation: [Curve; 3],
}

impl Animation {
    pub fn angles(&self, frame: usize) -> Vec<f64> {
        self.joints.iter().map(|c| c.value(frame as f64)).collect()
    }

    pub fn offset(&self, frame: usize) -> Vec3 {
        let f = frame as f64;
        Vec3::new(self.translation[0].value(f), self.translation[1].value(f), self.translation[2].value(f))
    }
}

/// Posed meshes for frames `0..n_frames`.
pub fn animate(gt: &GroundTruth, anim: &Animation, n_frames: usize) -> Vec<Mesh> {
    (0..n_frames).map(|t| gt.posed_mesh(&anim.angles(t), &anim.offset(t))).collect()
}

/// Single-view rendering of a mesh.
#[derive(Debug, Clone)]
pub struct Rendering {
    pub depth: DepthBuffer,
    pub cloud: PointCloud,
    pub discontinuities: Vec<Vector2<f64>>,
}

impl Rendering {
    pub fn into_frame(self) -> Frame {
        Frame { cloud: self.cloud, discontinuities: self.discontinuities }
    }
}

/// Z-buffer rendering with back-projected pixels as the point cloud (normals
/// from the source triangles) and silhouette/depth-jump pixels as
/// discontinuities.
pub fn render_depth(mesh: &Mesh, cam: &Camera, jump_threshold: f64) -> Rendering {
    let depth = rasterize(mesh.positions(), mesh.faces(), cam);
    let (w, h) = (depth.width, depth.height);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut disc = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let Some(f) = depth.face_at(u, v) else { continue };
            let z = depth.depth_at(u, v);
            points.push(cam.backproject(u as f64, v as f64, z));
            normals.push(mesh.face_normal(f as usize));
            let mut edge = false;
            let (mut lo, mut hi) = (z, z);
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                        edge = true;
                        continue;
                    }
                    let d = depth.depth_at(nu as usize, nv as usize);
                    if d.is_infinite() {
                        edge = true;
                    } else {
                        lo = lo.min(d);
                        hi = hi.max(d);
                    }
                }
            }
            if edge || hi - lo > jump_threshold {
                disc.push(Vector2::new(u as f64, v as f64));
            }
        }
    }
    Rendering { depth, cloud: PointCloud { points, normals }, discontinuities: disc }
}

/// Gaussian displacement of every point along its normal.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    if sigma == 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
    let points = cloud.points.iter().zip(&cloud.normals).map(|(p, n)| p + n * normal.sample(&mut rng)).collect();
    PointCloud { points, normals: cloud.normals.clone() }
}

/// The default sensor placed on the `−z` side of the mesh, `distance` mm
/// from its bounding-box center, looking along `+z` with world `+y` up.
pub fn default_camera(mesh: &Mesh, distance: f64) -> Camera {
    let (lo, hi) = mesh.bounds();
    let center = (lo + hi) / 2.0;
    Camera::default_sensor().looking_at(center - Vec3::z() * distance, center, -Vec3::y())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipe_joint_and_labels() {
        let gt = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[0.5]));
        assert_eq!(gt.joints.len(), 1);
        assert!((gt.joints[0].position - Vec3::new(150.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(gt.n_parts, 2);
        for (p, &l) in gt.mesh.positions().iter().zip(&gt.labels) {
            assert_eq!(l, usize::from(p.x >= 150.0 - 1e-9));
        }
    }

    #[test]
    fn curve_interpolates_and_clamps() {
        let c = Curve { keys: vec![(0.0, 0.0), (10.0, 20.0), (20.0, 20.0)] };
        assert_eq!(c.value(-5.0), 0.0);
        assert_eq!(c.value(5.0), 10.0);
        assert_eq!(c.value(15.0), 20.0);
        assert_eq!(c.value(99.0), 20.0);
        assert_eq!(Curve::default().value(3.0), 0.0);
    }

    #[test]
    fn zero_noise_is_identity() {
        let cloud = PointCloud { points: vec![Vec3::new(1.0, 2.0, 3.0)], normals: vec![Vec3::z()] };
        assert_eq!(add_noise(&cloud, 0.0, 1), cloud);
    }
}
