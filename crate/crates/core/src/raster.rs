//! Z-buffer triangle rasterization.

use nalgebra::Vector2;

use crate::{Camera, Vec3};

/// Points closer than this (camera depth, mm) are not rasterized.
const NEAR_PLANE: f64 = 1e-3;

pub const NO_FACE: u32 = u32::MAX;

/// Per-pixel camera depth (`f64::INFINITY` for background) and the index of
/// the triangle that produced it.
#[derive(Debug, Clone)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub face: Vec<u32>,
}

impl DepthBuffer {
    pub fn depth_at(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    pub fn face_at(&self, u: usize, v: usize) -> Option<u32> {
        let f = self.face[v * self.width + u];
        (f != NO_FACE).then_some(f)
    }

    pub fn covered_pixels(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }

    /// Depth at the pixel containing a projected point, if inside the image.
    pub fn sample(&self, px: &Vector2<f64>) -> Option<f64> {
        let (u, v) = (px.x.round(), px.y.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some(self.depth_at(u as usize, v as usize))
    }
}

/// Renders the camera-facing triangles of a mesh. Depth at each pixel center
/// is the exact intersection of the pixel ray with the triangle plane; equal
/// depths keep the lower face index.
pub fn rasterize(positions: &[Vec3], faces: &[[u32; 3]], cam: &Camera) -> DepthBuffer {
    let (w, h) = (cam.width, cam.height);
    let mut buf = DepthBuffer { width: w, height: h, depth: vec![f64::INFINITY; w * h], face: vec![NO_FACE; w * h] };
    let cam_pts: Vec<Vec3> = positions.iter().map(|p| cam.to_camera(p)).collect();

    for (fi, tri) in faces.iter().enumerate() {
        let [a, b, c] = tri.map(|i| cam_pts[i as usize]);
        if a.z <= NEAR_PLANE || b.z <= NEAR_PLANE || c.z <= NEAR_PLANE {
            continue;
        }
        let n = (b - a).cross(&(c - a));
        // camera center is the origin in camera coordinates
        let facing = n.dot(&a);
        if facing >= 0.0 {
            continue;
        }
        let proj = |p: Vec3| Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy);
        let (pa, pb, pc) = (proj(a), proj(b), proj(c));
        let area = edge(&pa, &pb, &pc);
        if area == 0.0 {
            continue;
        }
        let u0 = pa.x.min(pb.x).min(pc.x).ceil().max(0.0);
        let u1 = pa.x.max(pb.x).max(pc.x).floor().min(w as f64 - 1.0);
        let v0 = pa.y.min(pb.y).min(pc.y).ceil().max(0.0);
        let v1 = pa.y.max(pb.y).max(pc.y).floor().min(h as f64 - 1.0);
        if u0 > u1 || v0 > v1 {
            continue;
        }
        let plane = n.dot(&a);
        for v in v0 as usize..=v1 as usize {
            for u in u0 as usize..=u1 as usize {
                let p = Vector2::new(u as f64, v as f64);
                let (e0, e1, e2) = (edge(&pb, &pc, &p), edge(&pc, &pa, &p), edge(&pa, &pb, &p));
                let inside = if area > 0.0 {
                    e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
                } else {
                    e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0
                };
                if !inside {
                    continue;
                }
                let ray = Vec3::new((u as f64 - cam.cx) / cam.fx, (v as f64 - cam.cy) / cam.fy, 1.0);
                let z = plane / n.dot(&ray);
                let k = v * w + u;
                if z > NEAR_PLANE && z < buf.depth[k] {
                    buf.depth[k] = z;
                    buf.face[k] = fi as u32;
                }
            }
        }
    }
    buf
}

fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_triangle_depth_is_exact() {
        let cam = Camera::new(100.0, 100.0, 31.5, 31.5, 64, 64);
        // tilted plane z = 100 + 0.5 x, wound to face the camera
        let z = |x: f64| 100.0 + 0.5 * x;
        let pos = vec![
            Vec3::new(-20.0, -20.0, z(-20.0)),
            Vec3::new(-20.0, 20.0, z(-20.0)),
            Vec3::new(20.0, 0.0, z(20.0)),
        ];
        let buf = rasterize(&pos, &[[0, 1, 2]], &cam);
        assert!(buf.covered_pixels() > 50);
        for v in 0..64 {
            for u in 0..64 {
                if buf.face_at(u, v).is_some() {
                    let p = cam.backproject(u as f64, v as f64, buf.depth_at(u, v));
                    assert!((p.z - z(p.x)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn back_facing_triangle_is_culled() {
        let cam = Camera::new(100.0, 100.0, 31.5, 31.5, 64, 64);
        let pos = vec![Vec3::new(-20.0, -20.0, 100.0), Vec3::new(20.0, 0.0, 100.0), Vec3::new(-20.0, 20.0, 100.0)];
        assert_eq!(rasterize(&pos, &[[0, 1, 2]], &cam).covered_pixels(), 0);
    }

    #[test]
    fn nearer_triangle_wins() {
        let cam = Camera::new(100.0, 100.0, 31.5, 31.5, 64, 64);
        let tri = |z: f64| [Vec3::new(-20.0, -20.0, z), Vec3::new(-20.0, 20.0, z), Vec3::new(20.0, 0.0, z)];
        let mut pos = tri(200.0).to_vec();
        pos.extend(tri(100.0));
        let buf = rasterize(&pos, &[[0, 1, 2], [3, 4, 5]], &cam);
        assert_eq!(buf.face_at(31, 31), Some(1));
        assert!((buf.depth_at(31, 31) - 100.0).abs() < 1e-12);
    }
}
