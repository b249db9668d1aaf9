use proptest::prelude::*;

use artirig::skeleton::{
    classify_nodes, closest_skeleton_point, contract, parse_skeleton, skeletonize, write_skeleton, ContractionConfig,
    CurveSkeleton,
};
use artirig::spatial::{closest_on_segment, InsideTest};
use artirig::synth::{make_primitive, PrimitiveSpec};
use artirig::Vec3;

#[test]
fn cylinder_contracts_onto_its_axis() {
    let m = make_primitive(&PrimitiveSpec::pipe(300.0, 20.0, &[])).mesh;
    let c = contract(&m, &ContractionConfig::default()).unwrap();
    // away from the caps, which shrink along the axis as well
    let worst = c
        .positions
        .iter()
        .zip(m.positions())
        .filter(|(_, rest)| rest.x > 40.0 && rest.x < 260.0)
        .map(|(p, _)| p.yz().norm())
        .fold(0.0, f64::max);
    assert!(worst < 0.05 * 20.0, "{worst} mm from the axis");
    assert!(c.volumes.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn strong_attraction_keeps_the_surface() {
    let m = make_primitive(&PrimitiveSpec::pipe(100.0, 10.0, &[])).mesh;
    let shift = |omega_h: f64| {
        let cfg = ContractionConfig { omega_h, max_iterations: 1, ..Default::default() };
        let c = contract(&m, &cfg).unwrap();
        c.positions.iter().zip(m.positions()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    };
    let (weak, strong) = (shift(1.0), shift(100.0));
    assert!(strong < 0.05 * weak, "moved {strong} vs {weak}");
}

#[test]
fn skeletons_are_trees_inside_the_shapes() {
    for (spec, ends) in [
        (PrimitiveSpec::pipe(300.0, 20.0, &[0.5]), 2),
        (PrimitiveSpec::star(3, 100.0, 15.0), 3),
        (PrimitiveSpec::lamp([120.0, 100.0, 80.0], 15.0), 2),
    ] {
        let m = make_primitive(&spec).mesh;
        let sk = skeletonize(&m, &ContractionConfig::default()).unwrap();
        assert!(sk.is_tree() && sk.is_connected());
        assert_eq!(sk.vertex_map.len(), m.n_vertices());
        assert_eq!(classify_nodes(&sk).0.len(), ends);
        let inside = InsideTest::new(&m).unwrap();
        assert!(sk.nodes.iter().all(|p| inside.contains(p)));
    }
}

#[test]
fn skeleton_text_roundtrip() {
    let m = make_primitive(&PrimitiveSpec::star(3, 80.0, 12.0)).mesh;
    let sk = skeletonize(&m, &ContractionConfig::default()).unwrap();
    let back: CurveSkeleton = parse_skeleton(&write_skeleton(&sk)).unwrap();
    assert_eq!(back, sk);
}

fn zigzag() -> CurveSkeleton {
    CurveSkeleton {
        nodes: vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0), Vec3::new(10.0, 10.0, 0.0), Vec3::new(10.0, 10.0, 10.0)],
        edges: vec![(0, 1), (1, 2), (2, 3)],
        vertex_map: Vec::new(),
    }
}

proptest! {
    #[test]
    fn closest_point_matches_dense_sampling(q in prop::array::uniform3(-20.0..30.0f64)) {
        let sk = zigzag();
        let q = Vec3::from(q);
        let found = closest_skeleton_point(&sk, &q);
        let oracle = sk
            .edges
            .iter()
            .map(|&(a, b)| (closest_on_segment(&q, &sk.nodes[a], &sk.nodes[b]).0 - q).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(((found.point - q).norm() - oracle).abs() < 1e-6);
        let dense = sk
            .edges
            .iter()
            .flat_map(|&(a, b)| (0..=1000).map(move |k| (a, b, k as f64 / 1000.0)))
            .map(|(a, b, t)| (sk.nodes[a].lerp(&sk.nodes[b], t) - q).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((found.point - q).norm() <= dense + 1e-9);
    }
}
