use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;

use super::TrackingError;
use crate::mesh::PlyData;
use crate::Vec3;

/// Oriented point samples of the observed surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self, TrackingError> {
        if points.len() != normals.len() {
            return Err(TrackingError::Shape(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        for (i, (p, n)) in points.iter().zip(&normals).enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(TrackingError::Shape(format!("point {i} is not finite")));
            }
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(TrackingError::Shape(format!("normal {i} has length {}", n.norm())));
            }
        }
        Ok(Self { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads a PLY with `x y z nx ny nz` vertex properties.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrackingError> {
        let data = PlyData::parse(&std::fs::read(path.as_ref())?)?;
        let normals = data.normals.ok_or_else(|| {
            TrackingError::Parse(format!("{}: point cloud has no normals", path.as_ref().display()))
        })?;
        Self::new(data.positions, normals)
    }

    /// Writes binary little-endian float64 PLY.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrackingError> {
        let data = PlyData { positions: self.points.clone(), normals: Some(self.normals.clone()), faces: Vec::new() };
        std::fs::write(path, data.to_binary_le())?;
        Ok(())
    }
}

/// One observation: the visible surface plus its depth-discontinuity pixels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    pub cloud: PointCloud,
    pub discontinuities: Vec<Vector2<f64>>,
}

pub fn write_pixels(pixels: &[Vector2<f64>]) -> String {
    let mut s = String::new();
    for p in pixels {
        let _ = writeln!(s, "{} {}", p.x, p.y);
    }
    s
}

pub fn parse_pixels(text: &str) -> Result<Vec<Vector2<f64>>, TrackingError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| TrackingError::Parse(format!("line {}: bad pixel {line:?}", lineno + 1)))?;
        if vals.len() != 2 {
            return Err(TrackingError::Parse(format!("line {}: expected \"u v\"", lineno + 1)));
        }
        out.push(Vector2::new(vals[0], vals[1]));
    }
    Ok(out)
}

pub fn load_pixels(path: impl AsRef<Path>) -> Result<Vec<Vector2<f64>>, TrackingError> {
    parse_pixels(&std::fs::read_to_string(path)?)
}
