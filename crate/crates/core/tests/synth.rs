use artirig::synth::{
    add_noise, animate, make_primitive, render_depth, Animation, Curve, PrimitiveSpec, Scenario,
};
use artirig::tracking::PointCloud;
use artirig::{Camera, Mesh, Vec3};

fn front_triangle() -> Mesh {
    let a = Vec3::new(-100.0, -100.0, 500.0);
    let b = Vec3::new(0.0, 100.0, 500.0);
    let c = Vec3::new(100.0, -100.0, 520.0);
    Mesh::new(vec![a, b, c], &[[0, 1, 2]]).unwrap()
}

#[test]
fn rendered_points_lie_on_the_triangle_plane() {
    let mesh = front_triangle();
    let cam = Camera::default_sensor();
    let r = render_depth(&mesh, &cam, 15.0);
    assert!(r.cloud.len() > 1000, "{} points", r.cloud.len());
    let n = mesh.face_normal(0);
    let p0 = mesh.positions()[0];
    for p in &r.cloud.points {
        assert!((p - p0).dot(&n).abs() < 1e-6);
    }
}

#[test]
fn rendered_normals_face_the_camera() {
    let mesh = front_triangle();
    let cam = Camera::default_sensor();
    let r = render_depth(&mesh, &cam, 15.0);
    for (p, n) in r.cloud.points.iter().zip(&r.cloud.normals) {
        assert!(n.dot(&(cam.center - p)) > 0.0);
    }
}

#[test]
fn rendered_points_reproject_to_pixel_centers() {
    let gt = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[0.5]));
    let cam = artirig::synth::default_camera(&gt.mesh, 600.0);
    let r = render_depth(&gt.mesh, &cam, 15.0);
    assert!(!r.cloud.is_empty());
    for p in &r.cloud.points {
        let (px, _) = cam.project(p);
        assert!((px.x - px.x.round()).abs() < 1e-6 && (px.y - px.y.round()).abs() < 1e-6, "{px:?}");
    }
    // silhouette pixels are reported
    assert!(!r.discontinuities.is_empty());
}

fn flat_cloud(n: usize) -> PointCloud {
    PointCloud {
        points: (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(),
        normals: vec![Vec3::z(); n],
    }
}

#[test]
fn noise_has_the_requested_deviation() {
    let cloud = flat_cloud(20_000);
    let noisy = add_noise(&cloud, 1.0, 3);
    let d: Vec<f64> = noisy.points.iter().map(|p| p.z).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    assert!((0.9..=1.1).contains(&std), "std {std}");
    assert!(noisy.points.iter().zip(&cloud.points).all(|(a, b)| a.x == b.x && a.y == b.y));
}

#[test]
fn noise_is_seeded() {
    let cloud = flat_cloud(100);
    assert_eq!(add_noise(&cloud, 0.0, 5), cloud);
    assert_eq!(add_noise(&cloud, 2.0, 5), add_noise(&cloud, 2.0, 5));
    assert_ne!(add_noise(&cloud, 2.0, 5), add_noise(&cloud, 2.0, 6));
}

#[test]
fn hinge_end_cap_sweeps_a_circle() {
    let gt = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[0.5]));
    let mut anim = Animation::default();
    anim.joints.push(Curve::linear(0.0, 0.0, 9.0, 90.0));
    let tip: Vec<usize> = (0..gt.mesh.n_vertices()).filter(|&i| gt.mesh.positions()[i].x > 300.0 - 1e-9).collect();
    assert!(!tip.is_empty());
    let joint = gt.joints[0].position;
    for m in animate(&gt, &anim, 10) {
        let c = tip.iter().map(|&i| m.positions()[i]).sum::<Vec3>() / tip.len() as f64;
        let r = (c - joint).norm();
        assert!((r - 150.0).abs() < 1.5, "arc radius {r}");
    }
}

#[test]
fn scenario_generation_is_deterministic() {
    let text = "primitive = pipe\nlength = 200\nradius = 15\njoints = 0.5\nframes = 3\ncurve.0 = 0:0 2:30\nnoise = 0.5\nseed = 4\n";
    let sc = Scenario::parse(text).unwrap();
    let (_, a) = sc.generate();
    let (_, b) = sc.generate();
    assert_eq!(a.frames.len(), 3);
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        assert_eq!(fa.cloud, fb.cloud);
        assert_eq!(fa.discontinuities, fb.discontinuities);
    }
    assert_eq!(a.truth, b.truth);
}

#[test]
fn zero_frame_scenario_is_rejected() {
    assert!(Scenario::parse("primitive = pipe\nframes = 0\n").is_err());
    assert!(Scenario::parse("primitive = pipe\n").is_err());
    assert!(Scenario::parse("primitive = cube\nframes = 2\n").is_err());
}

#[test]
fn dataset_roundtrips_through_disk() {
    let mut sc = Scenario::new(PrimitiveSpec::pipe(200.0, 15.0, &[0.5]), Animation::default(), 2);
    sc.noise = 0.3;
    let (_, ds) = sc.generate();
    let dir = tempfile::tempdir().unwrap();
    ds.save(dir.path()).unwrap();
    let back = artirig::synth::Dataset::load(dir.path()).unwrap();
    assert_eq!(back.frames.len(), 2);
    assert_eq!(back.template.n_vertices(), ds.template.n_vertices());
    assert_eq!(back.truth, ds.truth);
    for (a, b) in back.frames.iter().zip(&ds.frames) {
        assert_eq!(a.cloud.len(), b.cloud.len());
        for (p, q) in a.cloud.points.iter().zip(&b.cloud.points) {
            assert!((p - q).norm() < 1e-6);
        }
    }
}
