use std::fmt::Write as _;
use std::path::Path;

use super::{CurveSkeleton, SkeletonError};
use crate::Vec3;

/// `n <count>`, node lines, `e <count>`, edge lines, `map`, one node index per
/// surface vertex.
pub fn write_skeleton(sk: &CurveSkeleton) -> String {
    let mut s = format!("n {}\n", sk.nodes.len());
    for p in &sk.nodes {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "e {}", sk.edges.len());
    for (a, b) in &sk.edges {
        let _ = writeln!(s, "{a} {b}");
    }
    s.push_str("map\n");
    for n in &sk.vertex_map {
        let _ = writeln!(s, "{n}");
    }
    s
}

pub fn parse_skeleton(text: &str) -> Result<CurveSkeleton, SkeletonError> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
    let mut cur = 0;
    let mut next = |what: &str| -> Result<(usize, &str), SkeletonError> {
        let l = lines.get(cur).copied().ok_or_else(|| SkeletonError::Parse(format!("missing {what}")))?;
        cur += 1;
        Ok(l)
    };
    let bad = |line: usize, m: &str| SkeletonError::Parse(format!("line {line}: {m}"));
    let count = |(i, l): (usize, &str), key: &str| -> Result<usize, SkeletonError> {
        l.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(i, &format!("expected \"{key}<count>\"")))
    };

    let n = count(next("node count")?, "n ")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, l) = next("node line")?;
        let v: Vec<f64> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(i, "bad number"))?;
        if v.len() != 3 {
            return Err(bad(i, "expected \"x y z\""));
        }
        nodes.push(Vec3::new(v[0], v[1], v[2]));
    }
    let m = count(next("edge count")?, "e ")?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (i, l) = next("edge line")?;
        let v: Vec<usize> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(i, "bad edge"))?;
        if v.len() != 2 || v[0] >= n || v[1] >= n || v[0] == v[1] {
            return Err(bad(i, "edge must name two distinct nodes"));
        }
        edges.push((v[0].min(v[1]), v[0].max(v[1])));
    }
    let (i, l) = next("map section")?;
    if l != "map" {
        return Err(bad(i, "expected \"map\""));
    }
    let mut vertex_map = Vec::new();
    while let Ok((i, l)) = next("") {
        match l.parse::<usize>() {
            Ok(v) if v < n => vertex_map.push(v),
            _ => return Err(bad(i, "bad node index")),
        }
    }
    Ok(CurveSkeleton { nodes, edges, vertex_map })
}

impl CurveSkeleton {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SkeletonError> {
        parse_skeleton(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SkeletonError> {
        std::fs::write(path, write_skeleton(self))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let sk = CurveSkeleton {
            nodes: vec![Vec3::new(0.0, 1.5, -2.0), Vec3::new(0.1, 0.0, 1e-7)],
            edges: vec![(0, 1)],
            vertex_map: vec![0, 1, 1, 0],
        };
        let text = write_skeleton(&sk);
        assert!(text.starts_with("n 2\n"));
        assert_eq!(parse_skeleton(&text).unwrap(), sk);
    }

    #[test]
    fn bad_edge_rejected() {
        assert!(parse_skeleton("n 1\n0 0 0\ne 1\n0 0\nmap\n0\n").is_err());
    }
}
