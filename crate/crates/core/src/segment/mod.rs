//! Rigid-part segmentation from vertex trajectories.
//!
//! Two vertices on the same rigid part keep their distance and the angle
//! between their normals over time. Sampled trajectories are compared over
//! sliding windows of `dt` frames, turned into an affinity matrix and split
//! by spectral clustering on the normalized graph Laplacian; the number of
//! parts is the number of eigenvalues below a threshold. Unsampled vertices
//! inherit the label of the geodesically closest sample.

mod io;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use io::{parse_segmentation, write_segmentation};

use crate::linalg::{kmeans, symmetric_eigen, LinalgError};
use crate::mesh::Mesh;
use crate::tracking::TrajectorySet;
use crate::Exec;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("degenerate affinity: row {row} has zero degree")]
    DegenerateAffinity { row: usize },
    #[error("vertex {vertex} is not connected to any sampled vertex")]
    UnreachableVertex { vertex: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the comparison window `dt` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DtMode {
    /// `round(2 · max step / median step)` frames, where the steps are the
    /// displacements of all vertices between consecutive frames.
    #[default]
    Normalized,
    /// `round(2 · max step)` with the step in mm read as a frame count.
    Raw,
    Fixed(usize),
}

impl FromStr for DtMode {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized" => Ok(DtMode::Normalized),
            "raw" => Ok(DtMode::Raw),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|n| n.parse().ok())
                .filter(|&n: &usize| n >= 1)
                .map(DtMode::Fixed)
                .ok_or_else(|| {
                    SegmentError::Invalid(format!("dt mode must be normalized, raw or fixed:<n>, got {s:?}"))
                }),
        }
    }
}

impl fmt::Display for DtMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtMode::Normalized => f.write_str("normalized"),
            DtMode::Raw => f.write_str("raw"),
            DtMode::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Affinity falloff λ, 1/mm.
    pub lambda: f64,
    pub lambda_thresh: f64,
    pub samples: usize,
    pub seed: u64,
    pub dt_mode: DtMode,
    pub exec: Exec,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { lambda: 0.1, lambda_thresh: 0.7, samples: 1000, seed: 0, dt_mode: DtMode::Normalized, exec: Exec::default() }
    }
}

/// Displacement of every vertex between every pair of consecutive frames.
pub fn step_lengths(traj: &TrajectorySet) -> Vec<f64> {
    (1..traj.n_frames())
        .flat_map(|t| {
            traj.frame_positions(t).iter().zip(traj.frame_positions(t - 1)).map(|(a, b)| (a - b).norm())
        })
        .collect()
}

/// Comparison window in frames, clamped to `[1, T−1]`. A static sequence
/// gives 1; in normalized mode a zero median step falls back to the raw
/// formula.
pub fn compute_dt(traj: &TrajectorySet, mode: DtMode) -> usize {
    let upper = traj.n_frames().saturating_sub(1).max(1);
    let steps = step_lengths(traj);
    let max_step = steps.iter().copied().fold(0.0, f64::max);
    let frames = match mode {
        DtMode::Fixed(n) => n as f64,
        DtMode::Raw => 2.0 * max_step,
        DtMode::Normalized => {
            let med = median(&steps);
            if med > 0.0 {
                2.0 * max_step / med
            } else {
                2.0 * max_step
            }
        }
    };
    (frames.round().max(1.0) as usize).min(upper)
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryDistance {
    /// Largest change of the vertex distance over any `dt` window, mm.
    pub d_v: f64,
    /// Largest change of the angle between the normals, rad.
    pub d_n: f64,
    /// `(1 + d_n) · d_v`.
    pub d: f64,
}

pub fn trajectory_distance(traj: &TrajectorySet, i: usize, j: usize, dt: usize) -> TrajectoryDistance {
    let dist = |t: usize| (traj.position(i, t) - traj.position(j, t)).norm();
    // atan2 keeps near-parallel normals accurate, where acos loses half the digits
    let angle = |t: usize| {
        let (a, b) = (traj.normal(i, t), traj.normal(j, t));
        a.cross(&b).norm().atan2(a.dot(&b))
    };
    let mut d_v: f64 = 0.0;
    let mut d_n: f64 = 0.0;
    for t in dt..traj.n_frames() {
        d_v = d_v.max((dist(t) - dist(t - dt)).abs());
        d_n = d_n.max((angle(t) - angle(t - dt)).abs());
    }
    TrajectoryDistance { d_v, d_n, d: (1.0 + d_n) * d_v }
}

/// `min(count, n)` distinct vertex indices drawn uniformly, in ascending
/// order.
pub fn sample_vertices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = rand::seq::index::sample(&mut rng, n, count.min(n)).into_vec();
    s.sort_unstable();
    s
}

/// Dense affinity over sampled trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub matrix: DMatrix<f64>,
    /// Vertex index of each row.
    pub samples: Vec<usize>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `A_ij = exp(−λ d(T_i, T_j))` over the given samples. Each unordered pair
/// is evaluated once, so the result is exactly symmetric.
pub fn affinity(traj: &TrajectorySet, samples: &[usize], lambda: f64, dt: usize, exec: Exec) -> AffinityMatrix {
    let s = samples.len();
    let upper: Vec<Vec<f64>> = exec.map_range(s, |a| {
        (a + 1..s)
            .map(|b| (-lambda * trajectory_distance(traj, samples[a], samples[b], dt).d).exp())
            .collect()
    });
    let mut m = DMatrix::identity(s, s);
    for (a, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let b = a + 1 + off;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    AffinityMatrix { matrix: m, samples: samples.to_vec() }
}

/// `D^{-1/2} (D − A) D^{-1/2}` with `D_ii = Σ_j A_ij`.
pub fn normalized_laplacian(a: &DMatrix<f64>) -> Result<DMatrix<f64>, SegmentError> {
    let n = a.nrows();
    let degree: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    if let Some(row) = degree.iter().position(|&d| d <= 0.0) {
        return Err(SegmentError::DegenerateAffinity { row });
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { degree[i] } else { 0.0 };
        inv_sqrt[i] * (delta - a[(i, j)]) * inv_sqrt[j]
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Label per affinity row, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Ascending eigenvalues of the normalized Laplacian.
    pub eigenvalues: Vec<f64>,
}

/// Eigen-decomposition of the normalized Laplacian of an affinity matrix,
/// eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn spectral_embedding(a: &DMatrix<f64>) -> Result<SpectralEmbedding, SegmentError> {
    if a.nrows() == 0 {
        return Err(SegmentError::Invalid("affinity matrix is empty".into()));
    }
    let (eigenvalues, vectors) = symmetric_eigen(&normalized_laplacian(a)?)?;
    Ok(SpectralEmbedding { eigenvalues, vectors })
}

impl SpectralEmbedding {
    /// `k = #{λ_i < λ_thresh}` (at least 1), then k-means on the rows of
    /// the first `k` eigenvectors.
    pub fn cluster(&self, lambda_thresh: f64, seed: u64) -> SpectralResult {
        let n = self.vectors.nrows();
        let k = self.eigenvalues.iter().filter(|&&l| l < lambda_thresh).count().clamp(1, n);
        let rows = self.vectors.columns(0, k).into_owned();
        let labels = canonical_labels(&kmeans(&rows, k, seed).labels);
        SpectralResult { labels, k, eigenvalues: self.eigenvalues.clone() }
    }
}

/// Spectral clustering of an affinity matrix; see [`SpectralEmbedding::cluster`].
pub fn spectral_segment(a: &DMatrix<f64>, lambda_thresh: f64, seed: u64) -> Result<SpectralResult, SegmentError> {
    Ok(spectral_embedding(a)?.cluster(lambda_thresh, seed))
}

/// Renumbers labels in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Per-vertex part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: Vec<usize>,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
}

impl Segmentation {
    pub fn new(labels: Vec<usize>, k: usize, eigenvalues: Vec<f64>) -> Result<Self, SegmentError> {
        let mut seen = vec![false; k];
        for (v, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(SegmentError::Invalid(format!("vertex {v} has label {l} but k = {k}")));
            }
            seen[l] = true;
        }
        if let Some(l) = seen.iter().position(|s| !s) {
            return Err(SegmentError::Invalid(format!("label {l} is unused")));
        }
        Ok(Self { labels, k, eigenvalues })
    }

    /// Vertices carrying `label`.
    pub fn part(&self, label: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.labels[v] == label).collect()
    }
}

#[derive(PartialEq)]
struct Node {
    dist: f64,
    sample: usize,
    vertex: usize,
}

impl Eq for Node {}

impl Ord for Node {
    // min-heap on (dist, sample)
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.sample.cmp(&self.sample))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Gives every vertex the label of its geodesically closest sample, using
/// Dijkstra on the edge graph with Euclidean edge lengths. Equal distances
/// go to the lower sample index.
pub fn propagate_labels(
    mesh: &Mesh,
    sample_labels: &[usize],
    samples: &[usize],
    k: usize,
    eigenvalues: Vec<f64>,
) -> Result<Segmentation, SegmentError> {
    if sample_labels.len() != samples.len() {
        return Err(SegmentError::Invalid(format!(
            "{} labels for {} samples",
            sample_labels.len(),
            samples.len()
        )));
    }
    let n = mesh.n_vertices();
    let pos = mesh.positions();
    let topo = mesh.topology();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for (s, &v) in samples.iter().enumerate() {
        if v >= n {
            return Err(SegmentError::Invalid(format!("sample vertex {v} out of range")));
        }
        heap.push(Node { dist: 0.0, sample: s, vertex: v });
    }
    while let Some(Node { dist, sample, vertex }) = heap.pop() {
        if best[vertex].is_some() {
            continue;
        }
        best[vertex] = Some((dist, sample));
        for &w in topo.neighbors(vertex) {
            let w = w as usize;
            if best[w].is_none() {
                heap.push(Node { dist: dist + (pos[w] - pos[vertex]).norm(), sample, vertex: w });
            }
        }
    }
    let labels = best
        .iter()
        .enumerate()
        .map(|(v, b)| b.map(|(_, s)| sample_labels[s]).ok_or(SegmentError::UnreachableVertex { vertex: v }))
        .collect::<Result<Vec<_>, _>>()?;
    Segmentation::new(labels, k, eigenvalues)
}

/// Full segmentation of a tracked sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRun {
    pub segmentation: Segmentation,
    pub affinity: AffinityMatrix,
    pub dt: usize,
}

pub fn segment(traj: &TrajectorySet, mesh: &Mesh, cfg: &SegmentConfig) -> Result<SegmentRun, SegmentError> {
    if traj.n_vertices() != mesh.n_vertices() {
        return Err(SegmentError::Invalid(format!(
            "trajectories cover {} vertices, mesh has {}",
            traj.n_vertices(),
            mesh.n_vertices()
        )));
    }
    if traj.n_frames() < 2 {
        return Err(SegmentError::Invalid("segmentation needs at least 2 frames".into()));
    }
    let dt = compute_dt(traj, cfg.dt_mode);
    let samples = sample_vertices(mesh.n_vertices(), cfg.samples, cfg.seed);
    let affinity = affinity(traj, &samples, cfg.lambda, dt, cfg.exec);
    let embedding = spectral_embedding(&affinity.matrix)?;
    let segmentation = segment_embedded(mesh, &embedding, &samples, cfg.lambda_thresh, cfg.seed)?;
    Ok(SegmentRun { segmentation, affinity, dt })
}

/// Clusters a precomputed embedding and propagates the sample labels to
/// the whole mesh. Lets several thresholds share one eigen-decomposition.
pub fn segment_embedded(
    mesh: &Mesh,
    embedding: &SpectralEmbedding,
    samples: &[usize],
    lambda_thresh: f64,
    seed: u64,
) -> Result<Segmentation, SegmentError> {
    let spectral = embedding.cluster(lambda_thresh, seed);
    propagate_labels(mesh, &spectral.labels, samples, spectral.k, spectral.eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dt_mode_strings() {
        for m in [DtMode::Normalized, DtMode::Raw, DtMode::Fixed(7)] {
            assert_eq!(m.to_string().parse::<DtMode>().unwrap(), m);
        }
        assert!("fixed:0".parse::<DtMode>().is_err());
        assert!("fast".parse::<DtMode>().is_err());
    }

    #[test]
    fn canonical_numbering() {
        assert_eq!(canonical_labels(&[2, 2, 0, 1, 0]), vec![0, 0, 1, 2, 1]);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
