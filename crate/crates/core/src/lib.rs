//! Reconstruction of rigged articulated models from a watertight template
//! mesh and a single-view depth sequence.
//!
//! The pipeline runs in four stages, each exposed as its own module:
//!
//! 1. [`tracking`] deforms the template through the depth sequence with a
//!    Laplacian-regularized least-squares tracker and records per-vertex
//!    trajectories.
//! 2. [`segment`] clusters those trajectories into rigid parts by spectral
//!    clustering of a trajectory affinity matrix.
//! 3. [`skeleton`] contracts the template to a curve skeleton.
//! 4. [`rigging`] places joints at part boundaries, builds and refines the
//!    bone hierarchy, and computes bone-heat skinning weights.
//!
//! [`pose`] fits a finished rig to target shapes and scores the alignment,
//! [`synth`] generates articulated ground truth for testing, and
//! [`pipeline`] ties the stages together with file-based artifacts.

pub mod camera;
pub mod exec;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod pose;
pub mod raster;
pub mod rigging;
pub mod segment;
pub mod skeleton;
pub mod spatial;
pub mod synth;
pub mod tracking;

pub use camera::Camera;
pub use exec::Exec;
pub use mesh::Mesh;

/// 3D vector in millimeters.
pub type Vec3 = nalgebra::Vector3<f64>;
