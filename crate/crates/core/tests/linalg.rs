use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use artirig::linalg::{
    kmeans, symmetric_eigen, LeastSquaresSystem, LinalgError, ResidualBlock, SparseCholesky, SparseMatrix,
};

fn dense(n: usize, m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
}

fn spd(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_n).prop_flat_map(|n| dense(n, n)).prop_map(|b| {
        let n = b.nrows();
        // sparsify, then B Bᵀ + I
        let b = DMatrix::from_fn(n, n, |i, j| if (i * 7 + j * 3) % 4 == 0 { b[(i, j)] } else { 0.0 });
        &b * b.transpose() + DMatrix::identity(n, n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_solves_spd_systems(a in spd(40), seed in 0u64..1000) {
        let n = a.nrows();
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let chol = SparseCholesky::factor(&SparseMatrix::from_dense(&a)).unwrap();
        let x = nalgebra::DVector::from_vec(chol.solve(&b));
        let r = &a * &x - nalgebra::DVector::from_vec(b.clone());
        prop_assert!(r.norm() <= 1e-9 * (1.0 + nalgebra::DVector::from_vec(b).norm()));
    }

    #[test]
    fn sparse_dense_roundtrip(a in (1usize..12, 1usize..12).prop_flat_map(|(n, m)| dense(n, m))) {
        let a = a.map(|v| if v.abs() < 0.5 { 0.0 } else { v });
        let s = SparseMatrix::from_dense(&a);
        prop_assert_eq!(s.to_dense(), a.clone());
        prop_assert_eq!(s.transpose().to_dense(), a.transpose());
        prop_assert!(s.values().iter().all(|&v| v != 0.0));
        let x: Vec<f64> = (0..a.ncols()).map(|i| i as f64 - 2.0).collect();
        let y = a.clone() * nalgebra::DVector::from_vec(x.clone());
        for (p, q) in s.mul_vec(&x).iter().zip(y.iter()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_decomposition_is_orthonormal(b in (1usize..20).prop_flat_map(|n| dense(n, n))) {
        let a = (&b + b.transpose()) * 0.5;
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        let scale = a.norm().max(1.0);
        prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let n = a.nrows();
        prop_assert!((vecs.transpose() * &vecs - DMatrix::<f64>::identity(n, n)).abs().max() < 1e-8);
        for (i, &l) in vals.iter().enumerate() {
            let v = vecs.column(i);
            prop_assert!((&a * v - v * l).norm() < 1e-7 * scale);
        }
    }

    #[test]
    fn kmeans_is_seeded_and_monotone(pts in (3usize..40).prop_flat_map(|n| dense(n, 3)), k in 1usize..4, seed in 0u64..50) {
        let a = kmeans(&pts, k, seed);
        let b = kmeans(&pts, k, seed);
        prop_assert_eq!(&a.labels, &b.labels);
        for c in 0..k {
            prop_assert!(a.labels.contains(&c));
        }
        prop_assert!(a.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn least_squares_minimizes_objective(j in (2usize..10).prop_flat_map(|n| dense(n + 3, n)), w in 0.1..10.0f64) {
        let (m, n) = (j.nrows(), j.ncols());
        let mut sys = LeastSquaresSystem::new(n);
        let target: Vec<f64> = (0..m).map(|i| (i as f64).sin() * 5.0).collect();
        sys.push(ResidualBlock::new(SparseMatrix::from_dense(&j), target, w)).unwrap();
        // a weak identity block keeps the problem well posed
        sys.push(ResidualBlock::new(SparseMatrix::identity(n), vec![0.0; n], 1e-3)).unwrap();
        let x = artirig::linalg::solve_normal_equations(&sys).unwrap();
        let best = sys.objective(&x, 0);
        for k in 0..n {
            let mut y = x.clone();
            y[k] += 1e-3;
            prop_assert!(sys.objective(&y, 0) >= best);
        }
    }
}

#[test]
fn dense_pseudo_inverse_agrees_on_overdetermined_system() {
    let j = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0]);
    let b = nalgebra::DVector::from_vec(vec![1.0, 2.0, 4.0, 0.0]);
    let mut sys = LeastSquaresSystem::new(2);
    sys.push(ResidualBlock::new(SparseMatrix::from_dense(&j), b.as_slice().to_vec(), 1.0)).unwrap();
    let x = artirig::linalg::solve_normal_equations(&sys).unwrap();
    let oracle = j.pseudo_inverse(1e-14).unwrap() * b;
    assert_relative_eq!(x[0], oracle[0], max_relative = 1e-12);
    assert_relative_eq!(x[1], oracle[1], max_relative = 1e-12);
}

#[test]
fn indefinite_matrix_is_rejected() {
    let a = SparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
    assert!(matches!(SparseCholesky::factor(&a), Err(LinalgError::NotPositiveDefinite { .. })));
}

#[test]
fn mismatched_block_is_rejected() {
    let mut sys = LeastSquaresSystem::new(3);
    assert!(sys.push(ResidualBlock::new(SparseMatrix::identity(2), vec![0.0; 2], 1.0)).is_err());
    assert!(sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![0.0; 2], 1.0)).is_err());
    assert!(sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![0.0; 3], -1.0)).is_err());
}
