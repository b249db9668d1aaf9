use std::sync::OnceLock;

use nalgebra::Rotation3;
use proptest::prelude::*;

use artirig::pose::{alignment_error, alignment_error_squared, fit_pose, lbs_deform, parse_pose, write_pose, FitConfig, Pose};
use artirig::rigging::{infer_rig, Rig};
use artirig::segment::Segmentation;
use artirig::skeleton::{skeletonize, ContractionConfig};
use artirig::synth::{make_primitive, GroundTruth, PrimitiveSpec};
use artirig::{Exec, Vec3};

/// Ground-truth pipe and the rig inferred from its true labels.
fn hinge() -> &'static (GroundTruth, Rig) {
    static CELL: OnceLock<(GroundTruth, Rig)> = OnceLock::new();
    CELL.get_or_init(|| {
        let gt = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[0.5]));
        let seg = Segmentation::new(gt.labels.clone(), gt.n_parts, Vec::new()).unwrap();
        let sk = skeletonize(&gt.mesh, &ContractionConfig::default()).unwrap();
        let rig = infer_rig(&gt.mesh, &seg, &sk, Exec::default()).unwrap().rig;
        (gt, rig)
    })
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-50.0..50.0f64).prop_map(Vec3::from)
}

fn cloud(max: usize) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(), 1..max)
}

fn brute_force(a: &[Vec3], b: &[Vec3]) -> f64 {
    let nn = |p: &Vec3, set: &[Vec3]| set.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min);
    let s: f64 = a.iter().map(|p| nn(p, b)).sum::<f64>() + b.iter().map(|q| nn(q, a)).sum::<f64>();
    s / (a.len() + b.len()) as f64
}

#[test]
fn rest_pose_reproduces_the_mesh() {
    let (_, rig) = hinge();
    let out = lbs_deform(rig, &Pose::rest(rig));
    for (a, b) in out.iter().zip(rig.mesh.positions()) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn self_target_fits_with_zero_error() {
    let (_, rig) = hinge();
    let f = fit_pose(rig, rig.mesh.positions(), &Pose::rest(rig), &FitConfig::default());
    assert!(f.error < 1e-9, "{}", f.error);
}

#[test]
fn forty_degree_hinge_is_recovered() {
    let (gt, rig) = hinge();
    let j = rig.motion_joints()[0];
    let mut known = Pose::rest(rig);
    known.joints.insert(j, gt.joints[0].axis * 40f64.to_radians());
    let target = lbs_deform(rig, &known);
    let f = fit_pose(rig, &target, &Pose::rest(rig), &FitConfig::default());
    assert!(f.error < 1.0, "alignment error {} mm", f.error);
    let angle = f.pose.joint_rotation(j).norm().to_degrees();
    assert!((angle - 40.0).abs() < 1.0, "joint angle {angle}");
}

#[test]
fn forty_degree_ground_truth_mesh_fits_closely() {
    // the true mesh bends in a narrow band, the rig blends smoothly, so
    // even the right angle leaves some elbow error
    let (gt, rig) = hinge();
    let target = gt.pose_positions(&[40.0], &Vec3::zeros());
    let f = fit_pose(rig, &target, &Pose::rest(rig), &FitConfig::default());
    assert!(f.error < 2.0, "alignment error {} mm", f.error);
    let angle = f.pose.joints.values().next().unwrap().norm().to_degrees();
    assert!((angle - 40.0).abs() < 3.0, "joint angle {angle}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn translation_moves_every_vertex(t in vec3()) {
        let (_, rig) = hinge();
        let mut pose = Pose::rest(rig);
        pose.translation = t;
        for (a, b) in lbs_deform(rig, &pose).iter().zip(rig.mesh.positions()) {
            prop_assert!((a - b - t).norm() < 1e-9);
        }
    }

    #[test]
    fn global_rotation_is_rigid(w in prop::array::uniform3(-2.0..2.0f64), t in vec3()) {
        let (_, rig) = hinge();
        let r = Rotation3::new(Vec3::from(w));
        let pose = Pose { rotation: r, translation: t, ..Pose::rest(rig) };
        for (a, b) in lbs_deform(rig, &pose).iter().zip(rig.mesh.positions()) {
            prop_assert!((a - (r * b + t)).norm() < 1e-9);
        }
    }

    #[test]
    fn alignment_matches_brute_force(a in cloud(40), b in cloud(40)) {
        let e = alignment_error_squared(&a, &b);
        let oracle = brute_force(&a, &b);
        prop_assert!((e - oracle).abs() <= 1e-9 * (1.0 + oracle));
        prop_assert_eq!(e, alignment_error_squared(&b, &a));
    }

    #[test]
    fn alignment_scales_linearly(a in cloud(30), b in cloud(30), s in 0.1..10.0f64) {
        let scale = |v: &[Vec3]| v.iter().map(|p| p * s).collect::<Vec<_>>();
        let e = alignment_error(&a, &b);
        prop_assert!((alignment_error(&scale(&a), &scale(&b)) - s * e).abs() <= 1e-9 * (1.0 + s * e));
    }

    #[test]
    fn pose_text_roundtrip(w in prop::array::uniform3(-3.0..3.0f64), t in vec3(), j in prop::array::uniform3(-1.0..1.0f64)) {
        let mut pose = Pose { rotation: Rotation3::new(Vec3::from(w)), translation: t, ..Pose::identity() };
        pose.joints.insert(3, Vec3::from(j));
        prop_assert_eq!(parse_pose(&write_pose(&pose)).unwrap(), pose);
    }
}

#[test]
fn malformed_pose_is_rejected() {
    assert!(parse_pose("POSE1\n1 0 0 0\n0 1 0 0\n").is_err());
    assert!(parse_pose("POSE1\n2 0 0 0\n0 1 0 0\n0 0 1 0\n").is_err());
    assert!(parse_pose("POSE1\n1 0 0 0\n0 1 0 0\n0 0 1 0\nr 1 0 0\n").is_err());
}
