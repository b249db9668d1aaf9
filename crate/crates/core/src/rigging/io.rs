use std::fmt::Write as _;
use std::path::Path;

use super::{is_tree, Joint, Rig, RigError, VertexWeights};
use crate::mesh::load_mesh;
use crate::Vec3;

/// Serializes a rig: `RIG1`, `mesh <path>`, one `j id parent kind x y z`
/// line per joint (parent `-1` for the root), one `w vertex bone:weight ...`
/// line per vertex.
pub fn write_rig(joints: &[Joint], weights: &[VertexWeights], mesh_path: &str) -> String {
    let mut s = format!("RIG1\nmesh {mesh_path}\n");
    for (i, j) in joints.iter().enumerate() {
        let parent = j.parent.map_or(-1, |p| p as i64);
        let p = j.position;
        let _ = writeln!(s, "j {i} {parent} {} {} {} {}", j.kind, p.x, p.y, p.z);
    }
    for (v, row) in weights.iter().enumerate() {
        let _ = write!(s, "w {v}");
        for (b, w) in row {
            let _ = write!(s, " {b}:{w}");
        }
        s.push('\n');
    }
    s
}

/// Parsed rig file before its mesh is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RigFile {
    pub mesh_path: String,
    pub joints: Vec<Joint>,
    pub weights: Vec<VertexWeights>,
}

pub fn parse_rig(text: &str) -> Result<RigFile, RigError> {
    let bad = |line: usize, m: &str| RigError::Parse(format!("line {}: {m}", line + 1));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "RIG1" => {}
        _ => return Err(RigError::Parse("missing RIG1 header".into())),
    }
    let (n, l) = lines.next().ok_or_else(|| RigError::Parse("missing mesh line".into()))?;
    let mesh_path = l.trim().strip_prefix("mesh ").ok_or_else(|| bad(n, "expected \"mesh <path>\""))?.trim().to_string();

    let mut joints = Vec::new();
    let mut weights = Vec::new();
    for (n, l) in lines {
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("j") => {
                let f: Vec<&str> = tok.collect();
                if f.len() != 6 {
                    return Err(bad(n, "expected \"j id parent kind x y z\""));
                }
                let id: usize = f[0].parse().map_err(|_| bad(n, "bad joint id"))?;
                if id != joints.len() {
                    return Err(bad(n, "joint ids must be consecutive from 0"));
                }
                let parent: i64 = f[1].parse().map_err(|_| bad(n, "bad parent"))?;
                let parent = match parent {
                    -1 => None,
                    p if p >= 0 && (p as usize) < id => Some(p as usize),
                    _ => return Err(bad(n, "parent must precede its child")),
                };
                let kind = f[2].parse().map_err(|e: RigError| bad(n, &e.to_string()))?;
                let c: Vec<f64> = f[3..].iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| bad(n, "bad coordinate"))?;
                joints.push(Joint { position: Vec3::new(c[0], c[1], c[2]), parent, kind });
            }
            Some("w") => {
                let v: usize = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(n, "bad vertex index"))?;
                if v != weights.len() {
                    return Err(bad(n, "weight rows must be consecutive from 0"));
                }
                let row = tok
                    .map(|e| {
                        let (b, w) = e.split_once(':')?;
                        Some((b.parse().ok()?, w.parse().ok()?))
                    })
                    .collect::<Option<VertexWeights>>()
                    .ok_or_else(|| bad(n, "expected \"bone:weight\" entries"))?;
                if row.iter().any(|&(b, _)| b >= joints.len() || joints[b].parent.is_none()) {
                    return Err(bad(n, "weight refers to a joint without a bone"));
                }
                weights.push(row);
            }
            _ => return Err(bad(n, "expected a \"j\" or \"w\" line")),
        }
    }
    if !joints.is_empty() && !is_tree(&joints) {
        return Err(RigError::Parse("joints do not form a single tree".into()));
    }
    Ok(RigFile { mesh_path, joints, weights })
}

impl Rig {
    pub fn to_text(&self, mesh_path: &str) -> String {
        write_rig(&self.joints, &self.weights, mesh_path)
    }

    pub fn save(&self, path: impl AsRef<Path>, mesh_path: &str) -> Result<(), RigError> {
        std::fs::write(path, self.to_text(mesh_path))?;
        Ok(())
    }

    /// Reads a rig file and its mesh; a relative mesh path is resolved
    /// against the rig file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RigError> {
        let path = path.as_ref();
        let file = parse_rig(&std::fs::read_to_string(path)?)?;
        let mesh_path = Path::new(&file.mesh_path);
        let mesh_path = match path.parent() {
            Some(dir) if mesh_path.is_relative() => dir.join(mesh_path),
            _ => mesh_path.to_path_buf(),
        };
        let mesh = load_mesh(mesh_path)?;
        if file.weights.len() != mesh.n_vertices() {
            return Err(RigError::Invalid(format!(
                "rig has {} weight rows for a mesh with {} vertices",
                file.weights.len(),
                mesh.n_vertices()
            )));
        }
        Ok(Rig { mesh, joints: file.joints, weights: file.weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rigging::JointKind;

    #[test]
    fn roundtrip() {
        let joints = vec![
            Joint { position: Vec3::new(0.0, 0.0, 0.0), parent: None, kind: JointKind::Auxiliary },
            Joint { position: Vec3::new(1.5, -2.0, 1e-3), parent: Some(0), kind: JointKind::Motion },
            Joint { position: Vec3::new(3.0, 0.0, 0.0), parent: Some(1), kind: JointKind::Virtual },
        ];
        let weights = vec![vec![(1, 1.0)], vec![(1, 0.25), (2, 0.75)]];
        let text = write_rig(&joints, &weights, "m.obj");
        assert!(text.starts_with("RIG1\nmesh m.obj\nj 0 -1 auxiliary 0 0 0\n"));
        let back = parse_rig(&text).unwrap();
        assert_eq!(back, RigFile { mesh_path: "m.obj".into(), joints, weights });
    }

    #[test]
    fn rejects_bad_parent() {
        assert!(parse_rig("RIG1\nmesh a.obj\nj 0 1 motion 0 0 0\n").is_err());
        assert!(parse_rig("RIG2\nmesh a.obj\n").is_err());
        assert!(parse_rig("RIG1\nmesh a.obj\nj 0 -1 auxiliary 0 0 0\nw 0 0:1\n").is_err());
    }
}
