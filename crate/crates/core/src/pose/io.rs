use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3};

use super::{Pose, PoseError};
use crate::Vec3;

/// `POSE1`, the global transform as three rows `r0 r1 r2 t`, then one
/// `r joint rx ry rz` line per joint rotation.
pub fn write_pose(pose: &Pose) -> String {
    let mut s = String::from("POSE1\n");
    let r = pose.rotation.matrix();
    for i in 0..3 {
        let _ = writeln!(s, "{} {} {} {}", r[(i, 0)], r[(i, 1)], r[(i, 2)], pose.translation[i]);
    }
    for (j, v) in &pose.joints {
        let _ = writeln!(s, "r {j} {} {} {}", v.x, v.y, v.z);
    }
    s
}

pub fn parse_pose(text: &str) -> Result<Pose, PoseError> {
    let bad = |line: usize, m: &str| PoseError::Parse(format!("line {}: {m}", line + 1));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "POSE1" => {}
        _ => return Err(PoseError::Parse("missing POSE1 header".into())),
    }
    let mut m = Matrix3::zeros();
    let mut t = Vec3::zeros();
    for i in 0..3 {
        let (n, l) = lines.next().ok_or_else(|| PoseError::Parse("truncated global transform".into()))?;
        let v: Vec<f64> =
            l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(n, "bad number"))?;
        if v.len() != 4 {
            return Err(bad(n, "expected four numbers per transform row"));
        }
        for c in 0..3 {
            m[(i, c)] = v[c];
        }
        t[i] = v[3];
    }
    let mut pose = Pose { rotation: Rotation3::from_matrix_unchecked(m), translation: t, joints: Default::default() };
    for (n, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 5 || f[0] != "r" {
            return Err(bad(n, "expected \"r joint rx ry rz\""));
        }
        let j: usize = f[1].parse().map_err(|_| bad(n, "bad joint index"))?;
        let v: Vec<f64> = f[2..].iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| bad(n, "bad number"))?;
        if pose.joints.insert(j, Vec3::new(v[0], v[1], v[2])).is_some() {
            return Err(bad(n, "joint listed twice"));
        }
    }
    pose.validate()?;
    Ok(pose)
}

impl Pose {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoseError> {
        parse_pose(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PoseError> {
        std::fs::write(path, write_pose(self))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut p = Pose::translated(Vec3::new(1.0, -2.5, 3.0));
        p.rotation = Rotation3::new(Vec3::new(0.1, 0.2, -0.3));
        p.joints.insert(4, Vec3::new(0.0, 0.5, 0.0));
        let back = parse_pose(&write_pose(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn rejects_non_orthonormal() {
        assert!(parse_pose("POSE1\n2 0 0 0\n0 1 0 0\n0 0 1 0\n").is_err());
        assert!(parse_pose("POSE1\n1 0 0 0\n0 1 0 0\n").is_err());
    }
}
