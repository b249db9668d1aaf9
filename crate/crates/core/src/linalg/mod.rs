//! Numerical kernels shared by tracking, segmentation, skeletonization and
//! rigging: sparse least squares through the normal equations, dense
//! symmetric eigen-decomposition, and k-means.

mod cholesky;
mod eigen;
mod kmeans;
mod lsq;
mod sparse;

use thiserror::Error;

pub use cholesky::{reverse_cuthill_mckee, SparseCholesky};
pub use eigen::symmetric_eigen;
pub use kmeans::{kmeans, KMeansResult, KMEANS_MAX_ITERATIONS, KMEANS_TOLERANCE};
pub use lsq::{solve_normal_equations, LeastSquaresSystem, ResidualBlock};
pub use sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite: pivot {pivot:e} at original index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("eigen-decomposition of a {size}x{size} matrix did not converge")]
    NoConvergence { size: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
