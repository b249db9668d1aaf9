use proptest::prelude::*;

use artirig::segment::{
    affinity, canonical_labels, propagate_labels, sample_vertices, segment, trajectory_distance, SegmentConfig,
    Segmentation,
};
use artirig::synth::{animate, make_primitive, Animation, Curve, PrimitiveSpec};
use artirig::tracking::TrajectorySet;
use artirig::{Exec, Vec3};

fn trajectories(anim: &Animation, frames: usize) -> (artirig::synth::GroundTruth, TrajectorySet) {
    let gt = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[0.5]));
    let data: Vec<_> = animate(&gt, anim, frames).iter().map(|m| (m.positions().to_vec(), m.normals().to_vec())).collect();
    (gt, TrajectorySet::from_frames(&data).unwrap())
}

#[test]
fn separating_pair_distance() {
    let n = Vec3::z();
    let frames = vec![
        (vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)], vec![n, n]),
        (vec![Vec3::zeros(), Vec3::new(15.0, 0.0, 0.0)], vec![n, n]),
    ];
    let traj = TrajectorySet::from_frames(&frames).unwrap();
    let d = trajectory_distance(&traj, 0, 1, 1);
    assert_eq!((d.d_v, d.d_n, d.d), (5.0, 0.0, 5.0));
}

#[test]
fn rigid_motion_gives_one_part() {
    let mut anim = Animation::default();
    anim.translation[0] = Curve::linear(0.0, 0.0, 19.0, 40.0);
    let (gt, traj) = trajectories(&anim, 20);
    let r = segment(&traj, &gt.mesh, &SegmentConfig { samples: 300, ..Default::default() }).unwrap();
    assert_eq!(r.segmentation.k, 1);
}

#[test]
fn clean_hinge_gives_the_true_parts() {
    let mut anim = Animation::default();
    anim.joints.push(Curve::linear(0.0, 0.0, 29.0, 60.0));
    let (gt, traj) = trajectories(&anim, 30);
    let r = segment(&traj, &gt.mesh, &SegmentConfig { samples: 400, ..Default::default() }).unwrap();
    assert_eq!(r.segmentation.k, 2);
    let wrong = r.segmentation.labels.iter().zip(&gt.labels).filter(|(a, b)| a != b).count();
    let wrong = wrong.min(gt.labels.len() - wrong);
    assert!(wrong * 50 < gt.labels.len(), "{wrong} vertices mislabeled");
}

#[test]
fn propagation_covers_every_vertex() {
    let gt = make_primitive(&PrimitiveSpec::star(3, 80.0, 12.0));
    let samples = sample_vertices(gt.mesh.n_vertices(), 50, 2);
    let sample_labels: Vec<usize> = canonical_labels(&samples.iter().map(|&v| gt.labels[v]).collect::<Vec<_>>());
    let k = sample_labels.iter().max().unwrap() + 1;
    let seg: Segmentation = propagate_labels(&gt.mesh, &sample_labels, &samples, k, Vec::new()).unwrap();
    assert_eq!(seg.labels.len(), gt.mesh.n_vertices());
    for (i, &v) in samples.iter().enumerate() {
        assert_eq!(seg.labels[v], sample_labels[i]);
    }
}

#[test]
fn unused_label_is_rejected() {
    assert!(Segmentation::new(vec![0, 0, 2], 3, Vec::new()).is_err());
    assert!(Segmentation::new(vec![0, 3], 2, Vec::new()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn affinity_is_symmetric_with_unit_diagonal(lambda in 0.01..1.0f64, dt in 1usize..8, seed in 0u64..100) {
        let mut anim = Animation::default();
        anim.joints.push(Curve::linear(0.0, 0.0, 9.0, 30.0));
        let (gt, traj) = trajectories(&anim, 10);
        let samples = sample_vertices(gt.mesh.n_vertices(), 60, seed);
        let a = affinity(&traj, &samples, lambda, dt, Exec::Sequential);
        let m = &a.matrix;
        prop_assert_eq!(m.clone(), m.transpose());
        for i in 0..m.nrows() {
            prop_assert_eq!(m[(i, i)], 1.0);
            for j in 0..m.ncols() {
                prop_assert!(m[(i, j)] > 0.0 && m[(i, j)] <= 1.0);
            }
        }
        prop_assert_eq!(affinity(&traj, &samples, lambda, dt, Exec::Parallel).matrix, a.matrix);
    }

    #[test]
    fn samples_are_sorted_and_distinct(n in 1usize..500, count in 0usize..600, seed in any::<u64>()) {
        let s = sample_vertices(n, count, seed);
        prop_assert_eq!(s.len(), count.min(n));
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&v| v < n));
        prop_assert_eq!(sample_vertices(n, count, seed), s);
    }
}
