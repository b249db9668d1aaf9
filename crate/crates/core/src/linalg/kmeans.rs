use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KMEANS_MAX_ITERATIONS: usize = 100;
pub const KMEANS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squares after each Lloyd assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

/// Lloyd's k-means on the rows of `rows`, seeded k-means++ initialization.
///
/// Every cluster is non-empty on return: a cluster that loses all its points
/// takes over the point farthest from its current centroid.
pub fn kmeans(rows: &DMatrix<f64>, k: usize, seed: u64) -> KMeansResult {
    let n = rows.nrows();
    let dim = rows.ncols();
    assert!(k >= 1 && n >= k, "kmeans needs 1 <= k <= n (k={k}, n={n})");
    if k == 1 {
        let centroid = rows.row_mean();
        let inertia = (0..n).map(|i| (rows.row(i) - &centroid).norm_squared()).sum();
        return KMeansResult {
            labels: vec![0; n],
            centroids: DMatrix::from_rows(&[centroid]),
            inertia_history: vec![inertia],
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(rows, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();

    for _ in 0..KMEANS_MAX_ITERATIONS {
        let mut inertia = 0.0;
        for i in 0..n {
            let (best, d) = nearest(rows, i, &centroids);
            labels[i] = best;
            inertia += d;
        }
        if fix_empty_clusters(rows, &mut labels, &mut centroids, k) {
            inertia = (0..n).map(|i| sq_dist(rows, i, &centroids, labels[i])).sum();
        }
        history.push(inertia);

        let mut next = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            let mut row = next.row_mut(labels[i]);
            row += rows.row(i);
        }
        for c in 0..k {
            let mut row = next.row_mut(c);
            row /= counts[c] as f64;
        }
        let shift = (0..k)
            .map(|c| (next.row(c) - centroids.row(c)).norm())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_TOLERANCE {
            break;
        }
    }
    // Final assignment against the final centroids.
    let mut inertia = 0.0;
    for i in 0..n {
        let (best, d) = nearest(rows, i, &centroids);
        labels[i] = best;
        inertia += d;
    }
    if fix_empty_clusters(rows, &mut labels, &mut centroids, k) {
        inertia = (0..n).map(|i| sq_dist(rows, i, &centroids, labels[i])).sum();
    }
    history.push(inertia);
    KMeansResult { labels, centroids, inertia_history: history }
}

fn plus_plus_init(rows: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = rows.nrows();
    let mut centroids = DMatrix::zeros(k, rows.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &rows.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(rows, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &rows.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows, i, &centroids, c));
        }
    }
    centroids
}

fn sq_dist(rows: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (rows.row(i) - centroids.row(c)).norm_squared()
}

fn nearest(rows: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(rows, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Returns true when any label changed. The emptied centroid jumps onto the
/// stolen point, so the objective cannot increase.
fn fix_empty_clusters(
    rows: &DMatrix<f64>,
    labels: &mut [usize],
    centroids: &mut DMatrix<f64>,
    k: usize,
) -> bool {
    let mut changed = false;
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return changed;
        };
        // steal the point worst served by its own centroid, from a cluster
        // that can spare it
        let victim = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(rows, a, centroids, labels[a])
                    .total_cmp(&sq_dist(rows, b, centroids, labels[b]))
                    .then(b.cmp(&a))
            })
            .expect("n >= k guarantees a donor cluster");
        labels[victim] = empty;
        centroids.set_row(empty, &rows.row(victim));
        changed = true;
    }
}
