use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{AffinityMatrix, SegmentError, Segmentation};

const AFFINITY_MAGIC: &[u8; 4] = b"AFFN";

/// `k <k>` followed by one label per vertex.
pub fn write_segmentation(seg: &Segmentation) -> String {
    let mut s = format!("k {}\n", seg.k);
    for l in &seg.labels {
        let _ = writeln!(s, "{l}");
    }
    s
}

pub fn parse_segmentation(text: &str) -> Result<Segmentation, SegmentError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, m: &str| SegmentError::Parse(format!("line {}: {m}", line + 1));
    let (n0, header) = lines.next().ok_or_else(|| SegmentError::Parse("empty segmentation file".into()))?;
    let k = header
        .trim()
        .strip_prefix("k ")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| bad(n0, "expected \"k <count>\""))?;
    let labels = lines
        .map(|(n, l)| l.trim().parse::<usize>().map_err(|_| bad(n, &format!("bad label {l:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Segmentation::new(labels, k, Vec::new())
}

impl Segmentation {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        parse_segmentation(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SegmentError> {
        std::fs::write(path, write_segmentation(self))?;
        Ok(())
    }
}

impl AffinityMatrix {
    /// `AFFN`, u32 size, then the row-major matrix as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let s = self.len();
        let mut out = Vec::with_capacity(8 + s * s * 8);
        out.extend_from_slice(AFFINITY_MAGIC);
        out.extend_from_slice(&(s as u32).to_le_bytes());
        for i in 0..s {
            for j in 0..s {
                out.extend_from_slice(&self.matrix[(i, j)].to_le_bytes());
            }
        }
        out
    }

    /// Reads a dump; the sample map is not stored and comes back as `0..s`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SegmentError> {
        if bytes.len() < 8 || &bytes[..4] != AFFINITY_MAGIC {
            return Err(SegmentError::Parse("affinity file: missing AFFN header".into()));
        }
        let s = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() != 8 + s * s * 8 {
            return Err(SegmentError::Parse(format!(
                "affinity file: expected {} bytes, found {}",
                8 + s * s * 8,
                bytes.len()
            )));
        }
        let vals: Vec<f64> = bytes[8..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { matrix: DMatrix::from_row_slice(s, s, &vals), samples: (0..s).collect() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation_roundtrip() {
        let seg = Segmentation::new(vec![0, 1, 1, 0], 2, Vec::new()).unwrap();
        let text = write_segmentation(&seg);
        assert!(text.starts_with("k 2\n0\n1\n"));
        assert_eq!(parse_segmentation(&text).unwrap(), seg);
    }

    #[test]
    fn label_out_of_range_rejected() {
        assert!(parse_segmentation("k 2\n0\n2\n").is_err());
        assert!(parse_segmentation("k 2\n0\n0\n").is_err());
        assert!(parse_segmentation("2\n0\n1\n").is_err());
    }

    #[test]
    fn affinity_roundtrip() {
        let a = AffinityMatrix { matrix: DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]), samples: vec![0, 1] };
        let bytes = a.to_bytes();
        assert_eq!(bytes.len(), 8 + 32);
        assert_eq!(AffinityMatrix::from_bytes(&bytes).unwrap(), a);
    }
}
