use std::path::Path;

use super::TrackingError;
use crate::Vec3;

const MAGIC: &[u8; 4] = b"TRAJ";

/// Per-vertex position and unit-normal time series, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    n_frames: usize,
    n_vertices: usize,
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
}

impl TrajectorySet {
    pub fn new(n_vertices: usize) -> Self {
        Self { n_frames: 0, n_vertices, positions: Vec::new(), normals: Vec::new() }
    }

    /// Builds a set from per-frame position/normal arrays of equal length.
    pub fn from_frames(frames: &[(Vec<Vec3>, Vec<Vec3>)]) -> Result<Self, TrackingError> {
        let n = frames.first().map_or(0, |f| f.0.len());
        let mut set = Self::new(n);
        for (p, nrm) in frames {
            set.push(p, nrm)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, positions: &[Vec3], normals: &[Vec3]) -> Result<(), TrackingError> {
        if positions.len() != self.n_vertices || normals.len() != self.n_vertices {
            return Err(TrackingError::Shape(format!(
                "frame has {}/{} positions/normals, expected {}",
                positions.len(),
                normals.len(),
                self.n_vertices
            )));
        }
        self.positions.extend_from_slice(positions);
        self.normals.extend_from_slice(normals);
        self.n_frames += 1;
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn position(&self, i: usize, t: usize) -> Vec3 {
        self.positions[t * self.n_vertices + i]
    }

    pub fn normal(&self, i: usize, t: usize) -> Vec3 {
        self.normals[t * self.n_vertices + i]
    }

    pub fn frame_positions(&self, t: usize) -> &[Vec3] {
        &self.positions[t * self.n_vertices..(t + 1) * self.n_vertices]
    }

    pub fn frame_normals(&self, t: usize) -> &[Vec3] {
        &self.normals[t * self.n_vertices..(t + 1) * self.n_vertices]
    }

    /// Applies `f(t, position, normal)` to every sample, e.g. a per-frame rigid motion.
    pub fn map(&self, f: impl Fn(usize, &Vec3, &Vec3) -> (Vec3, Vec3)) -> Self {
        let mut out = self.clone();
        for t in 0..self.n_frames {
            for i in 0..self.n_vertices {
                let k = t * self.n_vertices + i;
                let (p, n) = f(t, &self.positions[k], &self.normals[k]);
                out.positions[k] = p;
                out.normals[k] = n;
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.positions.len() * 48);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n_frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_vertices as u32).to_le_bytes());
        for (p, n) in self.positions.iter().zip(&self.normals) {
            for c in [p.x, p.y, p.z, n.x, n.y, n.z] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrackingError> {
        let bad = |m: &str| TrackingError::Parse(format!("trajectory file: {m}"));
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("missing TRAJ header"));
        }
        let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 12 + t * n * 48;
        if bytes.len() != expected {
            return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let vals: Vec<f64> =
            bytes[12..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut set = Self::new(n);
        set.n_frames = t;
        for s in vals.chunks_exact(6) {
            set.positions.push(Vec3::new(s[0], s[1], s[2]));
            set.normals.push(Vec3::new(s[3], s[4], s[5]));
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrackingError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrackingError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_roundtrip() {
        let p = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.1, 1e-300, 7.0)];
        let n = vec![Vec3::z(), Vec3::x()];
        let set = TrajectorySet::from_frames(&[(p.clone(), n.clone()), (p, n)]).unwrap();
        let bytes = set.to_bytes();
        assert_eq!(&bytes[..4], b"TRAJ");
        assert_eq!(bytes.len(), 12 + 2 * 2 * 48);
        assert_eq!(TrajectorySet::from_bytes(&bytes).unwrap(), set);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let set = TrajectorySet::from_frames(&[(vec![Vec3::zeros()], vec![Vec3::z()])]).unwrap();
        let bytes = set.to_bytes();
        assert!(TrajectorySet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
