//! Curve skeletons by Laplacian contraction and edge collapse.
//!
//! The surface is first pulled inwards by repeatedly solving
//! `[W_L K; W_H] V' = [0; W_H V]`, where `K` is the cotangent stiffness of
//! the current positions. The contraction weight grows every iteration and
//! the per-vertex attraction grows as the one-ring area shrinks, so thin
//! regions settle while thick ones keep contracting. The nearly degenerate
//! result is then collapsed shortest-edge-first until no triangle survives;
//! the remaining edges form the skeleton and every surface vertex maps to the
//! node it was merged into.

mod collapse;
mod io;

use std::collections::VecDeque;

use thiserror::Error;

pub use collapse::collapse_to_graph;
pub use io::{parse_skeleton, write_skeleton};

use crate::linalg::{LeastSquaresSystem, LinalgError, ResidualBlock, SparseMatrix};
use crate::mesh::{cotangent_stiffness, mean_edge_length, signed_volume, voronoi_areas, Mesh, MeshError};
use crate::spatial::closest_on_segment;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("contraction solve failed: {0}")]
    SolveFailed(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("mesh has {0} connected components, expected 1")]
    Disconnected(usize),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionConfig {
    /// Initial contraction weight `W_L`.
    pub omega_l: f64,
    /// Factor applied to `W_L` after every iteration.
    pub omega_l_growth: f64,
    /// Initial attraction weight `W_H`.
    pub omega_h: f64,
    pub max_iterations: usize,
    /// Stop once the enclosed volume falls below this fraction of the
    /// original.
    pub volume_ratio_stop: f64,
    /// Skeleton edges shorter than this are merged after the collapse, mm.
    /// `None` means twice the mean edge length of the input.
    pub collapse_edge_length: Option<f64>,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            omega_l: 1.0,
            omega_l_growth: 2.0,
            omega_h: 1.0,
            max_iterations: 10,
            volume_ratio_stop: 1e-4,
            collapse_edge_length: None,
        }
    }
}

/// Output of [`contract`].
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    pub positions: Vec<Vec3>,
    /// Enclosed volume before the first and after every iteration.
    pub volumes: Vec<f64>,
}

impl Contraction {
    pub fn iterations(&self) -> usize {
        self.volumes.len() - 1
    }
}

pub fn contract(mesh: &Mesh, cfg: &ContractionConfig) -> Result<Contraction, SkeletonError> {
    mesh.require_watertight()?;
    let (_, n_components) = mesh.topology().components();
    if n_components != 1 {
        return Err(SkeletonError::Disconnected(n_components));
    }
    let n = mesh.n_vertices();
    let topo = mesh.topology();
    let rest_areas = voronoi_areas(mesh);
    let v0 = signed_volume(topo, mesh.positions()).abs();
    let mut volumes = vec![v0];
    let mut positions = mesh.positions().to_vec();
    let mut w_l = cfg.omega_l;
    let mut w_h = vec![cfg.omega_h; n];

    for _ in 0..cfg.max_iterations {
        if volumes.last().copied().unwrap_or(0.0) <= cfg.volume_ratio_stop * v0 {
            break;
        }
        let k = cotangent_stiffness(topo, &positions);
        let mut sys = LeastSquaresSystem::with_rhs(n, 3);
        sys.push(ResidualBlock::multi(k, vec![vec![0.0; n]; 3], w_l * w_l))?;
        let targets = (0..3).map(|c| (0..n).map(|i| w_h[i] * positions[i][c]).collect()).collect();
        sys.push(ResidualBlock::multi(SparseMatrix::diagonal(&w_h), targets, 1.0))?;
        let x = sys.solve()?;
        positions = (0..n).map(|i| Vec3::new(x[0][i], x[1][i], x[2][i])).collect();
        volumes.push(signed_volume(topo, &positions).abs());

        w_l *= cfg.omega_l_growth;
        let areas = voronoi_areas(&mesh.with_positions(positions.clone()));
        for i in 0..n {
            if areas[i] > 0.0 {
                w_h[i] = cfg.omega_h * (rest_areas[i] / areas[i]).sqrt();
            }
        }
    }
    Ok(Contraction { positions, volumes })
}

/// Curve skeleton with a total surface-vertex → node map.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSkeleton {
    pub nodes: Vec<Vec3>,
    /// Node pairs with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub vertex_map: Vec<usize>,
}

/// A point on the skeleton: either a node (edge-less skeletons) or a
/// position `t ∈ [0, 1]` along an edge `a → b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkeletonRef {
    Node(usize),
    Edge { edge: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonPoint {
    pub at: SkeletonRef,
    pub point: Vec3,
    /// Arc length from the edge's first node, mm (0 for nodes).
    pub arc: f64,
}

impl CurveSkeleton {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.nodes.len() && self.is_connected()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e];
        (self.nodes[b] - self.nodes[a]).norm()
    }

    /// Node of a skeleton point nearest along its edge.
    pub fn nearest_node(&self, p: &SkeletonPoint) -> usize {
        match p.at {
            SkeletonRef::Node(n) => n,
            SkeletonRef::Edge { edge, t } => {
                let (a, b) = self.edges[edge];
                if t <= 0.5 {
                    a
                } else {
                    b
                }
            }
        }
    }

    pub fn node_point(&self, n: usize) -> SkeletonPoint {
        SkeletonPoint { at: SkeletonRef::Node(n), point: self.nodes[n], arc: 0.0 }
    }

    /// Node path between two nodes, both included. `None` when they are not
    /// connected.
    pub fn node_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let adj = self.adjacency();
        let mut prev = vec![usize::MAX; self.nodes.len()];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &w in &adj[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        while *path.last().unwrap() != from {
            path.push(prev[*path.last().unwrap()]);
        }
        path.reverse();
        Some(path)
    }

    /// Polyline along the skeleton from `a` to `b`.
    pub fn path_between(&self, a: &SkeletonPoint, b: &SkeletonPoint) -> Vec<Vec3> {
        if let (SkeletonRef::Edge { edge: ea, .. }, SkeletonRef::Edge { edge: eb, .. }) = (a.at, b.at) {
            if ea == eb {
                return vec![a.point, b.point];
            }
        }
        // Route through the edge endpoints that give the shortest polyline.
        let ends = |p: &SkeletonPoint| -> Vec<usize> {
            match p.at {
                SkeletonRef::Node(n) => vec![n],
                SkeletonRef::Edge { edge, .. } => vec![self.edges[edge].0, self.edges[edge].1],
            }
        };
        let mut best: Option<(f64, Vec<Vec3>)> = None;
        for &s in &ends(a) {
            for &t in &ends(b) {
                let Some(nodes) = self.node_path(s, t) else { continue };
                let mut line = vec![a.point];
                line.extend(nodes.iter().map(|&n| self.nodes[n]));
                line.push(b.point);
                line.dedup();
                let len = polyline_length(&line);
                if best.as_ref().is_none_or(|(l, _)| len < *l) {
                    best = Some((len, line));
                }
            }
        }
        best.map_or_else(|| vec![a.point, b.point], |(_, l)| l)
    }
}

pub fn polyline_length(line: &[Vec3]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at half the arc length of a polyline.
pub fn polyline_midpoint(line: &[Vec3]) -> Vec3 {
    let half = 0.5 * polyline_length(line);
    let mut walked = 0.0;
    for w in line.windows(2) {
        let len = (w[1] - w[0]).norm();
        if walked + len >= half && len > 0.0 {
            return w[0].lerp(&w[1], (half - walked) / len);
        }
        walked += len;
    }
    line.last().copied().unwrap_or_else(Vec3::zeros)
}

/// Node indices of degree 1 and of degree ≥ 3.
pub fn classify_nodes(sk: &CurveSkeleton) -> (Vec<usize>, Vec<usize>) {
    let deg = sk.degrees();
    let endpoints = (0..deg.len()).filter(|&i| deg[i] == 1).collect();
    let junctions = (0..deg.len()).filter(|&i| deg[i] >= 3).collect();
    (endpoints, junctions)
}

/// Closest point of the skeleton to `p`, lowest edge index on ties. A
/// skeleton without edges answers with its nearest node.
pub fn closest_skeleton_point(sk: &CurveSkeleton, p: &Vec3) -> SkeletonPoint {
    assert!(!sk.nodes.is_empty(), "closest_skeleton_point on an empty skeleton");
    if sk.edges.is_empty() {
        let n = (0..sk.nodes.len())
            .min_by(|&a, &b| (sk.nodes[a] - p).norm_squared().total_cmp(&(sk.nodes[b] - p).norm_squared()))
            .unwrap();
        return sk.node_point(n);
    }
    let mut best: Option<(f64, SkeletonPoint)> = None;
    for (e, &(a, b)) in sk.edges.iter().enumerate() {
        let (q, t) = closest_on_segment(p, &sk.nodes[a], &sk.nodes[b]);
        let d = (q - p).norm_squared();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            let arc = t * (sk.nodes[b] - sk.nodes[a]).norm();
            best = Some((d, SkeletonPoint { at: SkeletonRef::Edge { edge: e, t }, point: q, arc }));
        }
    }
    best.unwrap().1
}

/// Majority label of the surface vertices mapped to each node, lowest label
/// on ties.
pub fn node_labels(sk: &CurveSkeleton, labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut votes = vec![vec![0usize; k]; sk.nodes.len()];
    for (v, &n) in sk.vertex_map.iter().enumerate() {
        votes[n][labels[v]] += 1;
    }
    votes
        .iter()
        .map(|c| {
            let mut best = 0;
            for (l, &count) in c.iter().enumerate() {
                if count > c[best] {
                    best = l;
                }
            }
            best
        })
        .collect()
}

/// Contraction followed by collapse.
pub fn skeletonize(mesh: &Mesh, cfg: &ContractionConfig) -> Result<CurveSkeleton, SkeletonError> {
    let contracted = contract(mesh, cfg)?;
    let cfg = ContractionConfig {
        collapse_edge_length: Some(cfg.collapse_edge_length.unwrap_or_else(|| 2.0 * mean_edge_length(mesh))),
        ..cfg.clone()
    };
    Ok(collapse_to_graph(mesh, &contracted.positions, &cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> CurveSkeleton {
        CurveSkeleton {
            nodes: (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(),
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
            vertex_map: (0..n).collect(),
        }
    }

    #[test]
    fn path_classification() {
        let (e, j) = classify_nodes(&path(5));
        assert_eq!(e, vec![0, 4]);
        assert!(j.is_empty());
        assert!(path(5).is_tree());
    }

    #[test]
    fn closest_point_on_path() {
        let sk = path(3);
        let q = closest_skeleton_point(&sk, &Vec3::new(1.5, 2.0, 0.0));
        assert_eq!(q.point, Vec3::new(1.5, 0.0, 0.0));
        assert_eq!(q.at, SkeletonRef::Edge { edge: 1, t: 0.5 });
        // node 1 is shared by edges 0 and 1; the lower edge wins
        let q = closest_skeleton_point(&sk, &Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(q.at, SkeletonRef::Edge { edge: 0, t: 1.0 });
    }

    #[test]
    fn midpoint_of_bent_path() {
        let sk = path(5);
        let a = closest_skeleton_point(&sk, &Vec3::new(0.2, 0.0, 0.0));
        let b = closest_skeleton_point(&sk, &Vec3::new(3.6, 0.0, 0.0));
        let line = sk.path_between(&a, &b);
        assert!((polyline_length(&line) - 3.4).abs() < 1e-12);
        assert!((polyline_midpoint(&line) - Vec3::new(1.9, 0.0, 0.0)).norm() < 1e-12);
    }
}
