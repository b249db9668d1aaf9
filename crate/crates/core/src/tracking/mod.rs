//! Deformable template tracking through a single-view depth sequence.
//!
//! Each frame minimizes, over the vertex positions `V`,
//!
//! ```text
//! ‖L V − L V_prev‖² + γ (Σ ‖V_i − X_i‖² + Σ ‖V_j × d_j − m_j‖²)
//! ```
//!
//! where `L` is the cotangent Laplacian of the previous estimate, `(i, X_i)`
//! are closest-point matches to the observed cloud, and `(j, d_j, m_j)` pair
//! vertices with the projection rays of silhouette pixels. The objective is
//! quadratic for fixed correspondences, so each outer iteration is one
//! sparse Cholesky solve.

mod cloud;
mod trajectory;

use log::debug;
use nalgebra::Vector2;
use thiserror::Error;

pub use cloud::{load_pixels, parse_pixels, write_pixels, Frame, PointCloud};
pub use trajectory::TrajectorySet;

use crate::linalg::{solve_normal_equations, LeastSquaresSystem, LinalgError, ResidualBlock, SparseMatrix};
use crate::mesh::{cotangent_laplacian, mean_edge_length, Mesh, MeshError, SparseLaplacian};
use crate::raster::rasterize;
use crate::spatial::KdTree;
use crate::{Camera, Exec, Vec3};

/// Weight of the pull towards the previous frame, relative to the mean
/// diagonal of the smoothness normal matrix. It only pins the translation
/// null space of `L`; data terms outweigh it by many orders of magnitude.
pub const ANCHOR_RELATIVE_WEIGHT: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("solve failed: {0}")]
    SolveFailed(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub gamma_def: f64,
    /// Normal-compatibility gate for point matches, degrees.
    pub max_normal_angle: f64,
    /// Distance gate for point matches and rim pairs, mm.
    pub max_corr_dist: f64,
    pub outer_iterations: usize,
    /// Also require a vertex to pass the depth-buffer test against the
    /// mesh's own rendering to count as visible.
    pub depth_test: bool,
    /// Slack of the depth-buffer test, mm.
    pub depth_tolerance: f64,
    /// Rim candidates must satisfy `|n · view| ≤ rim_max_cos`.
    pub rim_max_cos: f64,
    /// Length in mm that the objective counts as one unit. `None` uses the
    /// mean edge length of the mesh being tracked.
    pub length_unit: Option<f64>,
    pub exec: Exec,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gamma_def: 0.005,
            max_normal_angle: 45.0,
            max_corr_dist: 10.0,
            outer_iterations: 15,
            depth_test: true,
            depth_tolerance: 2.0,
            rim_max_cos: 0.3,
            length_unit: None,
            exec: Exec::default(),
        }
    }
}

/// Line `{p : p × d = m}` with unit direction `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerLine {
    pub d: Vec3,
    pub m: Vec3,
}

impl PluckerLine {
    pub fn through(point: &Vec3, direction: &Vec3) -> Self {
        let d = direction.normalize();
        Self { d, m: point.cross(&d) }
    }

    /// Euclidean distance from `p` to the line, `‖p × d − m‖`.
    pub fn distance(&self, p: &Vec3) -> f64 {
        (p.cross(&self.d) - self.m).norm()
    }
}

/// Projection ray of a pixel as a Plücker line through the camera center.
pub fn pixel_to_plucker(pixel: &Vector2<f64>, cam: &Camera) -> PluckerLine {
    PluckerLine::through(&cam.center, &cam.ray_direction(pixel.x, pixel.y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMatch {
    pub vertex: usize,
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RimMatch {
    pub vertex: usize,
    pub line: PluckerLine,
}

/// Vertices that face the camera and, with `depth_test`, are not hidden
/// behind other parts of the mesh.
pub fn visible_vertices(mesh: &Mesh, cam: &Camera, depth_test: bool, tolerance: f64) -> Vec<bool> {
    let buffer = depth_test.then(|| rasterize(mesh.positions(), mesh.faces(), cam));
    mesh.positions()
        .iter()
        .zip(mesh.normals())
        .map(|(p, n)| {
            if n.dot(&(p - cam.center)) >= 0.0 {
                return false;
            }
            let (px, z) = cam.project(p);
            if z <= 0.0 {
                return false;
            }
            match &buffer {
                None => cam.contains_pixel(px.x, px.y),
                Some(buf) => buf.sample(&px).is_some_and(|d| z <= d + tolerance),
            }
        })
        .collect()
}

/// Nearest cloud point for every visible vertex, kept when it passes the
/// normal-angle and distance gates.
pub fn find_point_correspondences(
    mesh: &Mesh,
    cloud: &PointCloud,
    cam: &Camera,
    cfg: &TrackerConfig,
) -> Vec<PointMatch> {
    let tree = KdTree::new(&cloud.points);
    point_matches(mesh, cloud, &tree, cam, cfg)
}

fn point_matches(
    mesh: &Mesh,
    cloud: &PointCloud,
    tree: &KdTree,
    cam: &Camera,
    cfg: &TrackerConfig,
) -> Vec<PointMatch> {
    if tree.is_empty() {
        return Vec::new();
    }
    let visible = visible_vertices(mesh, cam, cfg.depth_test, cfg.depth_tolerance);
    let cos_gate = cfg.max_normal_angle.to_radians().cos();
    let dist2_gate = cfg.max_corr_dist * cfg.max_corr_dist;
    let positions = mesh.positions();
    let normals = mesh.normals();
    cfg.exec
        .map_range(positions.len(), |i| {
            if !visible[i] {
                return None;
            }
            let (j, d2) = tree.nearest(&positions[i])?;
            (d2 <= dist2_gate && normals[i].dot(&cloud.normals[j]) >= cos_gate)
                .then(|| PointMatch { vertex: i, point: cloud.points[j] })
        })
        .into_iter()
        .flatten()
        .collect()
}

/// Pairs each discontinuity pixel with the vertex whose projection is
/// nearest in the image (lowest index on ties). Vertices behind the camera
/// are ignored.
pub fn find_rim_correspondences(pixels: &[Vector2<f64>], mesh: &Mesh, cam: &Camera) -> Vec<RimMatch> {
    nearest_projected(pixels, mesh, cam, |_| true)
}

fn nearest_projected(
    pixels: &[Vector2<f64>],
    mesh: &Mesh,
    cam: &Camera,
    keep: impl Fn(usize) -> bool,
) -> Vec<RimMatch> {
    let mut index = Vec::new();
    let mut projected = Vec::new();
    for (i, p) in mesh.positions().iter().enumerate() {
        let (px, z) = cam.project(p);
        if z > 0.0 && keep(i) {
            index.push(i);
            projected.push(Vec3::new(px.x, px.y, 0.0));
        }
    }
    let tree = KdTree::new(&projected);
    pixels
        .iter()
        .filter_map(|px| {
            let (k, _) = tree.nearest(&Vec3::new(px.x, px.y, 0.0))?;
            Some(RimMatch { vertex: index[k], line: pixel_to_plucker(px, cam) })
        })
        .collect()
}

/// Rim pairs actually used by the tracker. Only vertices seen nearly
/// edge-on (`|n · view| ≤ max_cos`) are candidates; of all pixels matched to
/// the same vertex only the one nearest to its projection is kept (lowest
/// pixel index on ties), and pairs whose ray passes farther than `max_dist`
/// from the vertex are dropped.
///
/// Silhouette pixels are much denser than vertices. Pulling one vertex
/// towards a fan of rays converging at the camera center rewards sliding the
/// whole mesh towards the camera, so the many-to-one pairs are thinned out.
pub fn rim_constraints(
    pixels: &[Vector2<f64>],
    mesh: &Mesh,
    cam: &Camera,
    max_cos: f64,
    max_dist: f64,
) -> Vec<RimMatch> {
    let positions = mesh.positions();
    let normals = mesh.normals();
    let matches = nearest_projected(pixels, mesh, cam, |i| {
        normals[i].dot(&(positions[i] - cam.center).normalize()).abs() <= max_cos
    });
    let mut best: Vec<Option<(f64, usize)>> = vec![None; mesh.n_vertices()];
    for (k, (m, px)) in matches.iter().zip(pixels).enumerate() {
        let d = (cam.project(&positions[m.vertex]).0 - px).norm_squared();
        let slot = &mut best[m.vertex];
        if slot.is_none_or(|(bd, _)| d < bd) {
            *slot = Some((d, k));
        }
    }
    best.into_iter()
        .flatten()
        .map(|(_, k)| matches[k])
        .filter(|r| r.line.distance(&positions[r.vertex]) <= max_dist)
        .collect()
}

/// Stacks the tracking objective for fixed correspondences over the `3n`
/// interleaved coordinates `(x₀, y₀, z₀, x₁, …)`.
///
/// The smoothness term scales with length as `s²` and the data terms as
/// `s⁻²`, so `γ_def` alone does not fix their balance. Lengths are measured
/// in units of `u` ([`TrackerConfig::length_unit`], by default the mean edge
/// length): the data blocks carry weight `γ_def / u⁴` against smoothness
/// weight 1, which makes the tracker independent of the mesh's scale.
///
/// Besides the smoothness, point and rim blocks the system carries a tiny
/// anchor `ε ‖V − V_prev‖²` (see [`ANCHOR_RELATIVE_WEIGHT`]) so that it stays
/// positive definite when the data terms are empty or weightless; `V_prev`
/// minimizes both the smoothness and the anchor term, so the fixed point is
/// unchanged.
pub fn assemble_system(
    prev: &Mesh,
    laplacian: &SparseLaplacian,
    points: &[PointMatch],
    rims: &[RimMatch],
    cfg: &TrackerConfig,
) -> LeastSquaresSystem {
    let n = prev.n_vertices();
    let mut sys = LeastSquaresSystem::new(3 * n);
    let l3 = laplacian.matrix().kron_identity3();
    let target = flatten(&laplacian.apply(prev.positions()));
    let sq_sum: f64 = laplacian.matrix().values().iter().map(|v| v * v).sum();
    let anchor = ANCHOR_RELATIVE_WEIGHT * sq_sum / n.max(1) as f64;
    let gamma = cfg.gamma_def / length_unit(prev, cfg).powi(4);
    sys.push(ResidualBlock::new(l3, target, 1.0)).expect("smoothness block");
    sys.push(ResidualBlock::new(SparseMatrix::identity(3 * n), flatten(prev.positions()), anchor))
        .expect("anchor block");

    let mut t = Vec::with_capacity(points.len() * 3);
    let mut b = Vec::with_capacity(points.len() * 3);
    for (r, m) in points.iter().enumerate() {
        for k in 0..3 {
            t.push((3 * r + k, 3 * m.vertex + k, 1.0));
            b.push(m.point[k]);
        }
    }
    sys.push(ResidualBlock::new(SparseMatrix::from_triplets(3 * points.len(), 3 * n, &t), b, gamma))
        .expect("point block");

    let mut t = Vec::with_capacity(rims.len() * 6);
    let mut b = Vec::with_capacity(rims.len() * 3);
    for (r, m) in rims.iter().enumerate() {
        let (row, col) = (3 * r, 3 * m.vertex);
        for (dr, dc, v) in cross_rows(&m.line.d) {
            t.push((row + dr, col + dc, v));
        }
        b.extend(m.line.m.iter());
    }
    sys.push(ResidualBlock::new(SparseMatrix::from_triplets(3 * rims.len(), 3 * n, &t), b, gamma))
        .expect("rim block");
    sys
}

fn length_unit(mesh: &Mesh, cfg: &TrackerConfig) -> f64 {
    cfg.length_unit.unwrap_or_else(|| mean_edge_length(mesh)).max(f64::MIN_POSITIVE)
}

/// Nonzeros of the 3×3 matrix `M` with `M v = v × d`.
fn cross_rows(d: &Vec3) -> [(usize, usize, f64); 6] {
    [(0, 1, d.z), (0, 2, -d.y), (1, 0, -d.z), (1, 2, d.x), (2, 0, d.y), (2, 1, -d.x)]
}

pub fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Vec3> {
    x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

/// Per-iteration record of a [`track_frame`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub point_matches: usize,
    pub rim_matches: usize,
    /// Objective at the solution of this iteration.
    pub objective: f64,
}

/// Deforms `prev` towards one observation.
pub fn track_frame(prev: &Mesh, frame: &Frame, cam: &Camera, cfg: &TrackerConfig) -> Result<Mesh, TrackingError> {
    track_frame_with_stats(prev, frame, cam, cfg).map(|r| r.0)
}

pub fn track_frame_with_stats(
    prev: &Mesh,
    frame: &Frame,
    cam: &Camera,
    cfg: &TrackerConfig,
) -> Result<(Mesh, Vec<IterationStats>), TrackingError> {
    let laplacian = cotangent_laplacian(prev)?;
    let tree = KdTree::new(&frame.cloud.points);
    let mut current = prev.clone();
    let mut stats = Vec::with_capacity(cfg.outer_iterations);
    for _ in 0..cfg.outer_iterations {
        let points = point_matches(&current, &frame.cloud, &tree, cam, cfg);
        let rims = rim_constraints(&frame.discontinuities, &current, cam, cfg.rim_max_cos, cfg.max_corr_dist);
        if points.is_empty() && rims.is_empty() {
            // only smoothness and anchor remain, both minimized by `prev`
            stats.push(IterationStats { point_matches: 0, rim_matches: 0, objective: 0.0 });
            current = prev.clone();
            continue;
        }
        let sys = assemble_system(prev, &laplacian, &points, &rims, cfg);
        let x = solve_normal_equations(&sys)?;
        stats.push(IterationStats {
            point_matches: points.len(),
            rim_matches: rims.len(),
            objective: sys.objective(&x, 0),
        });
        current = prev.with_positions(unflatten(&x));
    }
    Ok((current, stats))
}

/// Tracks the template through `frames`. Frame 0 of the result is the
/// template itself; frame `t ≥ 1` is the estimate for `frames[t]`.
pub fn track_sequence(
    template: &Mesh,
    frames: &[Frame],
    cam: &Camera,
    cfg: &TrackerConfig,
) -> Result<TrajectorySet, TrackingError> {
    if frames.len() < 2 {
        return Err(TrackingError::Shape(format!("tracking needs at least 2 frames, got {}", frames.len())));
    }
    let mut set = TrajectorySet::new(template.n_vertices());
    set.push(template.positions(), template.normals())?;
    let cfg = &TrackerConfig { length_unit: Some(length_unit(template, cfg)), ..cfg.clone() };
    let mut mesh = template.clone();
    for (t, frame) in frames.iter().enumerate().skip(1) {
        let (next, stats) = track_frame_with_stats(&mesh, frame, cam, cfg)?;
        if let Some(last) = stats.last() {
            debug!("frame {t}: {} point / {} rim matches", last.point_matches, last.rim_matches);
        }
        set.push(next.positions(), next.normals())?;
        mesh = next;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_ray_is_optical_axis() {
        let cam = Camera::default_sensor();
        let l = pixel_to_plucker(&Vector2::new(cam.cx, cam.cy), &cam);
        assert_eq!(l.d, Vec3::z());
        assert_eq!(l.m, Vec3::zeros());
    }

    #[test]
    fn cross_rows_realize_cross_product() {
        let d = Vec3::new(0.3, -0.5, 0.8).normalize();
        let v = Vec3::new(1.5, 2.0, -4.0);
        let mut out = Vec3::zeros();
        for (r, c, val) in cross_rows(&d) {
            out[r] += val * v[c];
        }
        assert!((out - v.cross(&d)).norm() < 1e-15);
    }
}
