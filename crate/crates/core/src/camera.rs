//! Pinhole depth camera with OpenCV axis conventions: camera `x` right,
//! `y` down, `z` forward (depth).

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("invalid camera: {0}")]
    Invalid(String),
    #[error("camera file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Intrinsics plus a world←camera rigid pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Camera-to-world rotation.
    pub rotation: Matrix3<f64>,
    /// Camera center in world coordinates.
    pub center: Vec3,
}

#[derive(Serialize, Deserialize)]
struct CameraFile {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    pose: [f64; 12],
}

impl Camera {
    /// Camera at the world origin looking down `+z`.
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        Self { fx, fy, cx, cy, width, height, rotation: Matrix3::identity(), center: Vec3::zeros() }
    }

    /// 640×480 sensor with `fx = fy = 570` and a centered principal point.
    pub fn default_sensor() -> Self {
        Self::new(570.0, 570.0, 319.5, 239.5, 640, 480)
    }

    pub fn with_pose(mut self, rotation: Matrix3<f64>, center: Vec3) -> Self {
        self.rotation = rotation;
        self.center = center;
        self
    }

    /// Places the camera at `eye`, optical axis towards `target`, image `y`
    /// axis as close to `down` as possible.
    pub fn looking_at(self, eye: Vec3, target: Vec3, down: Vec3) -> Self {
        let z = (target - eye).normalize();
        let x = down.cross(&z).normalize();
        let y = z.cross(&x);
        self.with_pose(Matrix3::from_columns(&[x, y, z]), eye)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::Invalid(format!("focal lengths must be positive: {} {}", self.fx, self.fy)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::Invalid("image size must be non-zero".into()));
        }
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-9 || r.determinant() < 0.0 {
            return Err(CameraError::Invalid(format!("pose rotation is not orthonormal (error {err:e})")));
        }
        Ok(())
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.center)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.center
    }

    /// Pixel coordinates and depth of a world point. Pixel `(u, v)` covers
    /// `[u - 0.5, u + 0.5)`, so integer coordinates are pixel centers.
    pub fn project(&self, p: &Vec3) -> (Vector2<f64>, f64) {
        let c = self.to_camera(p);
        (Vector2::new(self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy), c.z)
    }

    /// Unit world-space direction of the ray through a pixel.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        self.rotation * Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0).normalize()
    }

    /// World point at camera depth `z` along the ray through a pixel.
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        self.to_world(&Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z))
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }

    pub fn to_json(&self) -> String {
        let r = &self.rotation;
        let t = &self.center;
        let file = CameraFile {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            pose: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
                r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
                r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            ],
        };
        serde_json::to_string_pretty(&file).expect("camera serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CameraError> {
        let f: CameraFile = serde_json::from_str(text)?;
        let p = f.pose;
        let rotation = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]);
        let cam = Self::new(f.fx, f.fy, f.cx, f.cy, f.width, f.height)
            .with_pose(rotation, Vec3::new(p[3], p[7], p[11]));
        cam.validate()?;
        Ok(cam)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CameraError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Rotation about a unit axis through the origin, as a matrix.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).into_inner()
}
