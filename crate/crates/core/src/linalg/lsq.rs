use super::{LinalgError, SparseCholesky, SparseMatrix};

/// One weighted residual block `weight · ‖J x − b‖²`, possibly with several
/// right-hand sides sharing the same coefficients.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub coeffs: SparseMatrix,
    pub targets: Vec<Vec<f64>>,
    pub weight: f64,
}

impl ResidualBlock {
    pub fn new(coeffs: SparseMatrix, target: Vec<f64>, weight: f64) -> Self {
        Self { coeffs, targets: vec![target], weight }
    }

    pub fn multi(coeffs: SparseMatrix, targets: Vec<Vec<f64>>, weight: f64) -> Self {
        Self { coeffs, targets, weight }
    }
}

/// Stacked weighted linear least-squares problem over a shared unknown vector.
#[derive(Debug, Clone)]
pub struct LeastSquaresSystem {
    n_unknowns: usize,
    n_rhs: usize,
    blocks: Vec<ResidualBlock>,
}

impl LeastSquaresSystem {
    pub fn new(n_unknowns: usize) -> Self {
        Self { n_unknowns, n_rhs: 1, blocks: Vec::new() }
    }

    pub fn with_rhs(n_unknowns: usize, n_rhs: usize) -> Self {
        Self { n_unknowns, n_rhs, blocks: Vec::new() }
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }

    pub fn push(&mut self, block: ResidualBlock) -> Result<(), LinalgError> {
        if block.coeffs.n_cols() != self.n_unknowns {
            return Err(LinalgError::DimensionMismatch(format!(
                "block has {} columns, system has {} unknowns",
                block.coeffs.n_cols(),
                self.n_unknowns
            )));
        }
        if !(block.weight >= 0.0) {
            return Err(LinalgError::DimensionMismatch(format!(
                "block weight must be nonnegative, got {}",
                block.weight
            )));
        }
        if block.targets.len() != self.n_rhs
            || block.targets.iter().any(|t| t.len() != block.coeffs.n_rows())
        {
            return Err(LinalgError::DimensionMismatch(
                "block targets do not match its row count".into(),
            ));
        }
        self.blocks.push(block);
        Ok(())
    }

    /// `Σ γ JᵀJ`
    pub fn normal_matrix(&self) -> SparseMatrix {
        let mut acc: Option<SparseMatrix> = None;
        for b in self.active_blocks() {
            let g = b.coeffs.weighted_gram(b.weight);
            acc = Some(match acc {
                None => g,
                Some(a) => a.add_scaled(&g, 1.0),
            });
        }
        acc.unwrap_or_else(|| SparseMatrix::zeros(self.n_unknowns, self.n_unknowns))
    }

    /// `Σ γ Jᵀb` for right-hand side `k`.
    pub fn normal_rhs(&self, k: usize) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n_unknowns];
        for b in self.active_blocks() {
            for (r, v) in rhs.iter_mut().zip(b.coeffs.transpose_mul_vec(&b.targets[k])) {
                *r += b.weight * v;
            }
        }
        rhs
    }

    /// `Σ γ ‖J x − b‖²` for right-hand side `k`.
    pub fn objective(&self, x: &[f64], k: usize) -> f64 {
        self.active_blocks()
            .map(|b| {
                let jx = b.coeffs.mul_vec(x);
                b.weight
                    * jx.iter().zip(&b.targets[k]).map(|(a, t)| (a - t) * (a - t)).sum::<f64>()
            })
            .sum()
    }

    /// Solves the normal equations by sparse Cholesky, one solution per
    /// right-hand side.
    pub fn solve(&self) -> Result<Vec<Vec<f64>>, LinalgError> {
        let n = self.normal_matrix();
        let chol = SparseCholesky::factor(&n)?;
        Ok((0..self.n_rhs).map(|k| chol.solve(&self.normal_rhs(k))).collect())
    }

    fn active_blocks(&self) -> impl Iterator<Item = &ResidualBlock> {
        self.blocks.iter().filter(|b| b.weight > 0.0 && b.coeffs.n_rows() > 0)
    }
}

/// Minimizer of `Σ γ ‖J x − b‖²` for the first right-hand side.
pub fn solve_normal_equations(sys: &LeastSquaresSystem) -> Result<Vec<f64>, LinalgError> {
    Ok(sys.solve()?.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let mut sys = LeastSquaresSystem::new(3);
        sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![1.0, 2.0, 3.0], 1.0))
            .unwrap();
        assert_eq!(solve_normal_equations(&sys).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_blocks_average() {
        let mut sys = LeastSquaresSystem::new(3);
        sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![0.0; 3], 1.0)).unwrap();
        sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![2.0; 3], 1.0)).unwrap();
        let x = solve_normal_equations(&sys).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn underconstrained_system_fails() {
        let mut sys = LeastSquaresSystem::new(3);
        let j = SparseMatrix::from_triplets(1, 3, &[(0, 0, 1.0)]);
        sys.push(ResidualBlock::new(j, vec![1.0], 1.0)).unwrap();
        assert!(matches!(
            solve_normal_equations(&sys),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let mut sys = LeastSquaresSystem::new(3);
        let err = sys.push(ResidualBlock::new(SparseMatrix::identity(2), vec![0.0; 2], 1.0));
        assert!(err.is_err());
        let err = sys.push(ResidualBlock::new(SparseMatrix::identity(3), vec![0.0; 3], -1.0));
        assert!(err.is_err());
    }
}
