use approx::assert_relative_eq;
use proptest::prelude::*;

use artirig::mesh::{cotangent_laplacian, face_area, load_mesh, save_mesh, voronoi_areas, MeshError};
use artirig::synth::{make_primitive, PrimitiveSpec};
use artirig::{Mesh, Vec3};

/// `n × n` planar grid with unit spacing, split along one diagonal.
fn grid(n: usize) -> Mesh {
    let mut p = Vec::new();
    for y in 0..n {
        for x in 0..n {
            p.push(Vec3::new(x as f64, y as f64, 0.0));
        }
    }
    let mut f = Vec::new();
    for y in 0..n - 1 {
        for x in 0..n - 1 {
            let i = (y * n + x) as u32;
            let n = n as u32;
            f.push([i, i + 1, i + n + 1]);
            f.push([i, i + n + 1, i + n]);
        }
    }
    Mesh::new(p, &f).unwrap()
}

fn jittered(mesh: &Mesh, amp: f64, seed: u64) -> Mesh {
    let p = mesh
        .positions()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let h = (i as u64).wrapping_mul(0x9E37_79B9).wrapping_add(seed);
            let s = |k: u64| ((h.wrapping_mul(k) % 1000) as f64 / 500.0 - 1.0) * amp;
            v + Vec3::new(s(3), s(5), s(7))
        })
        .collect();
    mesh.with_positions(p)
}

#[test]
fn interior_laplacian_of_linear_field_vanishes() {
    let m = grid(6);
    let l = cotangent_laplacian(&m).unwrap();
    let field: Vec<f64> = m.positions().iter().map(|p| 2.0 * p.x - 3.0 * p.y + 1.0).collect();
    let out = l.matrix().mul_vec(&field);
    for y in 1..5 {
        for x in 1..5 {
            assert!(out[y * 6 + x].abs() < 1e-12, "vertex ({x}, {y}): {}", out[y * 6 + x]);
        }
    }
}

#[test]
fn half_ring_areas_sum_to_one_and_a_half_surface_areas() {
    for spec in [PrimitiveSpec::pipe(300.0, 20.0, &[0.5]), PrimitiveSpec::star(3, 100.0, 15.0)] {
        let m = make_primitive(&spec).mesh;
        let total: f64 = (0..m.n_faces()).map(|f| face_area(&m, f)).sum();
        // every face is counted by its three corners, half each
        assert_relative_eq!(voronoi_areas(&m).iter().sum::<f64>(), 1.5 * total, max_relative = 1e-9);
    }
}

#[test]
fn primitives_are_closed() {
    for spec in [
        PrimitiveSpec::pipe(300.0, 20.0, &[0.75]),
        PrimitiveSpec::star(3, 100.0, 15.0),
        PrimitiveSpec::lamp([120.0, 100.0, 80.0], 15.0),
    ] {
        let m = make_primitive(&spec).mesh;
        assert!(m.topology().is_watertight());
        assert_eq!(m.topology().components().1, 1);
        let v = m.n_vertices() as i64;
        let e = m.topology().edge_count() as i64;
        let f = m.n_faces() as i64;
        assert_eq!(v - e + f, 2, "Euler characteristic of a sphere");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_mesh("/nonexistent/mesh.obj"), Err(MeshError::Io(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_rows_sum_to_zero(amp in 0.0..2.0f64, seed in 0u64..1000) {
        let m = jittered(&make_primitive(&PrimitiveSpec::pipe(200.0, 20.0, &[0.5])).mesh, amp, seed);
        let l = cotangent_laplacian(&m).unwrap();
        let scale = l.matrix().values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let r = l.matrix().mul_vec(&vec![1.0; m.n_vertices()]);
        prop_assert!(r.iter().all(|v| v.abs() <= 1e-9 * scale));
    }

    #[test]
    fn laplacian_is_translation_invariant(dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let m = make_primitive(&PrimitiveSpec::star(3, 60.0, 10.0)).mesh;
        let moved = m.with_positions(m.positions().iter().map(|p| p + Vec3::new(dx, dy, 0.0)).collect());
        let a = cotangent_laplacian(&m).unwrap().matrix().to_dense();
        let b = cotangent_laplacian(&moved).unwrap().matrix().to_dense();
        prop_assert!((a - b).abs().max() < 1e-9);
    }

    #[test]
    fn obj_and_ply_roundtrip(amp in 0.0..5.0f64, seed in 0u64..1000, ply in any::<bool>()) {
        let m = jittered(&make_primitive(&PrimitiveSpec::pipe(100.0, 10.0, &[])).mesh, amp, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if ply { "m.ply" } else { "m.obj" });
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        prop_assert_eq!(back.positions(), m.positions());
        prop_assert_eq!(back.faces(), m.faces());
    }
}
