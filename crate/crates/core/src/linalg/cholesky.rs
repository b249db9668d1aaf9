//! Envelope (profile) Cholesky factorization under a reverse Cuthill–McKee
//! ordering.
//!
//! Mesh normal-equation matrices are banded once reordered, so all fill-in
//! stays inside each row's envelope and the inner kernels are contiguous dot
//! products.

use std::collections::VecDeque;

use super::{LinalgError, SparseMatrix};

/// `A = P Lᵀ L Pᵀ` factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    /// Factors a symmetric matrix; only the lower triangle (after reordering)
    /// is read, so either a full or a triangular pattern works.
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(LinalgError::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                n,
                a.n_cols()
            )));
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Permuted lower-triangle entries, grouped by row.
        let mut first: Vec<usize> = (0..n).collect();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut max_diag: f64 = 0.0;
        for c in 0..n {
            for (r, v) in a.col(c) {
                let (pr, pc) = (inv[r], inv[c]);
                if pr == pc {
                    max_diag = max_diag.max(v.abs());
                }
                if pc <= pr {
                    rows[pr].push((pc, v));
                    first[pr] = first[pr].min(pc);
                }
            }
        }

        let mut row_start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            row_start.push(total);
            total += i - first[i] + 1;
        }
        row_start.push(total);
        let mut values = vec![0.0; total];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                values[row_start[i] + j - first[i]] += v;
            }
        }

        let tol = 1e-12 * max_diag;
        for i in 0..n {
            let fi = first[i];
            let ri = row_start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let rj = row_start[j];
                let li = &values[ri + k0 - fi..ri + j - fi];
                let lj = &values[rj + k0 - fj..rj + j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let ljj = values[rj + j - fj];
                let slot = ri + j - fi;
                values[slot] = (values[slot] - dot) / ljj;
            }
            let li = &values[ri..ri + i - fi];
            let sq: f64 = li.iter().map(|x| x * x).sum();
            let d = values[ri + i - fi] - sq;
            if !(d > tol) {
                return Err(LinalgError::NotPositiveDefinite { index: perm[i], pivot: d });
            }
            values[ri + i - fi] = d.sqrt();
        }

        Ok(Self { n, perm, first, row_start, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor, a proxy for memory and work.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let row = &self.values[ri..ri + i - fi];
            let dot: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - dot) / self.values[ri + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let xi = y[i] / self.values[ri + i - fi];
            y[i] = xi;
            let row = &self.values[ri..ri + i - fi];
            for (yj, l) in y[fi..i].iter_mut().zip(row) {
                *yj -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..a.n_cols() {
        for (r, _) in a.col(c) {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Finds a node of (near) maximal eccentricity in `seed`'s component by
/// repeated breadth-first sweeps.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(current, adj);
        let ecc = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap_or(&0);
        if ecc <= best_ecc && current != seed {
            break;
        }
        best_ecc = ecc;
        let candidate = (0..adj.len())
            .filter(|&v| levels[v] == ecc)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

fn bfs_levels(start: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = 0;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}
