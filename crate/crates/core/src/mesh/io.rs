//! OBJ and PLY readers/writers.
//!
//! Writers emit shortest round-trip decimal (`{}` formatting of `f64`), so a
//! save/load cycle reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, MeshError};
use crate::Vec3;

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> MeshError {
    MeshError::Parse { location: location.into(), message: message.into() }
}

/// Loads an `.obj` or `.ply` triangle mesh, chosen by extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "obj" => {
            let text = fs::read_to_string(path)?;
            let (v, f) = parse_obj(&text)?;
            Mesh::new(v, &f)
        }
        "ply" => {
            let data = PlyData::parse(&fs::read(path)?)?;
            let faces = data.triangles()?;
            Mesh::new(data.positions, &faces)
        }
        other => Err(parse_err(path.display().to_string(), format!("unknown mesh extension {other:?}"))),
    }
}

/// Saves as `.obj` or ASCII `.ply` (float64), chosen by extension.
pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let path = path.as_ref();
    let text = match extension(path).as_str() {
        "obj" => write_obj(mesh),
        "ply" => String::from_utf8(PlyData::from_mesh(mesh).to_ascii()).expect("ascii"),
        other => {
            return Err(parse_err(path.display().to_string(), format!("unknown mesh extension {other:?}")))
        }
    };
    fs::write(path, text)?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for p in mesh.positions() {
        let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    s
}

pub fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Vec<[u32; 3]>), MeshError> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let loc = || format!("line {}", lineno + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let t = tok.next().ok_or_else(|| parse_err(loc(), "vertex needs 3 coordinates"))?;
                    *slot = t.parse().map_err(|_| parse_err(loc(), format!("bad coordinate {t:?}")))?;
                }
                verts.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = tok.collect();
                if idx.len() != 3 {
                    return Err(MeshError::UnsupportedPrimitive {
                        location: loc(),
                        message: format!("face with {} vertices; only triangles are supported", idx.len()),
                    });
                }
                let mut tri = [0u32; 3];
                for (slot, t) in tri.iter_mut().zip(idx) {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head.parse().map_err(|_| parse_err(loc(), format!("bad index {t:?}")))?;
                    let resolved = if i > 0 { i - 1 } else { verts.len() as i64 + i };
                    if i == 0 || resolved < 0 {
                        return Err(parse_err(loc(), format!("index {i} out of range")));
                    }
                    *slot = resolved as u32;
                }
                faces.push(tri);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Vertices, optional normals and polygon lists from a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub positions: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub faces: Vec<Vec<u32>>,
}

impl PlyData {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        Self {
            positions: mesh.positions().to_vec(),
            normals: None,
            faces: mesh.faces().iter().map(|f| f.to_vec()).collect(),
        }
    }

    /// Faces as triangles; anything else is an unsupported primitive.
    pub fn triangles(&self) -> Result<Vec<[u32; 3]>, MeshError> {
        self.faces
            .iter()
            .enumerate()
            .map(|(i, f)| {
                <[u32; 3]>::try_from(f.as_slice()).map_err(|_| MeshError::UnsupportedPrimitive {
                    location: format!("face {i}"),
                    message: format!("face with {} vertices; only triangles are supported", f.len()),
                })
            })
            .collect()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, MeshError> {
        let (elements, format, body_start) = parse_header(bytes)?;
        match format.as_str() {
            "ascii" => {
                let body = std::str::from_utf8(&bytes[body_start..])
                    .map_err(|_| parse_err(format!("byte {body_start}"), "ASCII body is not UTF-8"))?;
                read_ascii(&elements, body)
            }
            "binary_little_endian" => read_binary(&elements, &bytes[body_start..], body_start),
            other => Err(parse_err("header", format!("unsupported PLY format {other:?}"))),
        }
    }

    pub fn to_ascii(&self) -> Vec<u8> {
        let mut s = self.header("ascii");
        for (i, p) in self.positions.iter().enumerate() {
            let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
            if let Some(n) = &self.normals {
                let _ = write!(s, " {} {} {}", n[i].x, n[i].y, n[i].z);
            }
            s.push('\n');
        }
        for f in &self.faces {
            let _ = write!(s, "{}", f.len());
            for v in f {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s.into_bytes()
    }

    pub fn to_binary_le(&self) -> Vec<u8> {
        let mut out = self.header("binary_little_endian").into_bytes();
        for (i, p) in self.positions.iter().enumerate() {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&c.to_le_bytes());
            }
            if let Some(n) = &self.normals {
                for c in [n[i].x, n[i].y, n[i].z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        for f in &self.faces {
            out.push(f.len() as u8);
            for v in f {
                out.extend_from_slice(&(*v as i32).to_le_bytes());
            }
        }
        out
    }

    fn header(&self, format: &str) -> String {
        let mut s = format!("ply\nformat {format} 1.0\nelement vertex {}\n", self.positions.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        if self.normals.is_some() {
            s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
        }
        if !self.faces.is_empty() {
            let _ = writeln!(s, "element face {}", self.faces.len());
            s.push_str("property list uchar int vertex_indices\n");
        }
        s.push_str("end_header\n");
        s
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, String, usize), MeshError> {
    let mut pos = 0;
    let mut lineno = 0;
    let mut next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map(|e| *pos + e).unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        lineno += 1;
        Some(line)
    };
    if next_line(&mut pos).as_deref() != Some("ply") {
        return Err(parse_err("line 1", "missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line(&mut pos).ok_or_else(|| parse_err("header", "missing end_header"))?;
        let loc = format!("header byte {pos}");
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("format") => format = tok.get(1).map(|s| s.to_string()),
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2)) else {
                    return Err(parse_err(loc, "malformed element line"));
                };
                let count = count.parse().map_err(|_| parse_err(loc.clone(), "bad element count"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(loc.clone(), "property before element"))?;
                let prop = if tok.get(1) == Some(&"list") {
                    let (Some(ct), Some(it), Some(name)) = (tok.get(2), tok.get(3), tok.get(4)) else {
                        return Err(parse_err(loc, "malformed list property"));
                    };
                    Property::List(
                        name.to_string(),
                        Scalar::parse(ct).ok_or_else(|| parse_err(loc.clone(), format!("unknown type {ct}")))?,
                        Scalar::parse(it).ok_or_else(|| parse_err(loc.clone(), format!("unknown type {it}")))?,
                    )
                } else {
                    let (Some(ty), Some(name)) = (tok.get(1), tok.get(2)) else {
                        return Err(parse_err(loc, "malformed property"));
                    };
                    Property::Scalar(
                        name.to_string(),
                        Scalar::parse(ty).ok_or_else(|| parse_err(loc.clone(), format!("unknown type {ty}")))?,
                    )
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let format = format.ok_or_else(|| parse_err("header", "missing format line"))?;
    Ok((elements, format, pos))
}

#[derive(Default)]
struct VertexSlots {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
}

fn vertex_slots(el: &Element) -> VertexSlots {
    let mut s = VertexSlots::default();
    for (i, p) in el.props.iter().enumerate() {
        if let Property::Scalar(name, _) = p {
            match name.as_str() {
                "x" => s.xyz[0] = Some(i),
                "y" => s.xyz[1] = Some(i),
                "z" => s.xyz[2] = Some(i),
                "nx" => s.normal[0] = Some(i),
                "ny" => s.normal[1] = Some(i),
                "nz" => s.normal[2] = Some(i),
                _ => {}
            }
        }
    }
    s
}

fn store_vertex(out: &mut PlyData, slots: &VertexSlots, vals: &[f64], loc: &str) -> Result<(), MeshError> {
    let get = |k: Option<usize>| k.map(|k| vals[k]);
    let (Some(x), Some(y), Some(z)) = (get(slots.xyz[0]), get(slots.xyz[1]), get(slots.xyz[2])) else {
        return Err(parse_err(loc, "vertex element lacks x/y/z"));
    };
    out.positions.push(Vec3::new(x, y, z));
    if let (Some(nx), Some(ny), Some(nz)) = (get(slots.normal[0]), get(slots.normal[1]), get(slots.normal[2])) {
        out.normals.get_or_insert_with(Vec::new).push(Vec3::new(nx, ny, nz));
    }
    Ok(())
}

fn is_face_list(name: &str) -> bool {
    name == "vertex_indices" || name == "vertex_index"
}

fn read_ascii(elements: &[Element], body: &str) -> Result<PlyData, MeshError> {
    let mut out = PlyData::default();
    let mut lines = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    for el in elements {
        let slots = vertex_slots(el);
        for _ in 0..el.count {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| parse_err("body", format!("truncated {} element", el.name)))?;
            let loc = format!("body line {}", lineno + 1);
            let mut tok = line.split_whitespace();
            let num = |tok: &mut std::str::SplitWhitespace| -> Result<f64, MeshError> {
                let t = tok.next().ok_or_else(|| parse_err(loc.clone(), "missing value"))?;
                t.parse::<f64>().map_err(|_| parse_err(loc.clone(), format!("bad number {t:?}")))
            };
            let mut vals = Vec::with_capacity(el.props.len());
            let mut list = None;
            for p in &el.props {
                match p {
                    Property::Scalar(..) => vals.push(num(&mut tok)?),
                    Property::List(name, _, _) => {
                        let n = num(&mut tok)? as usize;
                        let items = (0..n).map(|_| num(&mut tok).map(|v| v as u32)).collect::<Result<Vec<_>, _>>()?;
                        vals.push(f64::NAN);
                        if is_face_list(name) {
                            list = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => store_vertex(&mut out, &slots, &vals, &loc)?,
                "face" => out.faces.push(list.ok_or_else(|| parse_err(loc, "face lacks vertex_indices"))?),
                _ => {}
            }
        }
    }
    Ok(out)
}

fn read_binary(elements: &[Element], body: &[u8], offset: usize) -> Result<PlyData, MeshError> {
    let mut out = PlyData::default();
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], MeshError> {
        if *pos + n > body.len() {
            return Err(parse_err(format!("byte {}", offset + *pos), "unexpected end of binary body"));
        }
        let s = &body[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    for el in elements {
        let slots = vertex_slots(el);
        for _ in 0..el.count {
            let loc = format!("byte {}", offset + pos);
            let mut vals = Vec::with_capacity(el.props.len());
            let mut list = None;
            for p in &el.props {
                match p {
                    Property::Scalar(_, ty) => vals.push(ty.read_le(take(&mut pos, ty.size())?)),
                    Property::List(name, ct, it) => {
                        let n = ct.read_le(take(&mut pos, ct.size())?) as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            items.push(it.read_le(take(&mut pos, it.size())?) as u32);
                        }
                        vals.push(f64::NAN);
                        if is_face_list(name) {
                            list = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => store_vertex(&mut out, &slots, &vals, &loc)?,
                "face" => out.faces.push(list.ok_or_else(|| parse_err(loc, "face lacks vertex_indices"))?),
                _ => {}
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::tetrahedron;

    #[test]
    fn minimal_obj() {
        let (v, f) = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let m = Mesh::new(v, &f).unwrap();
        assert_eq!((m.n_vertices(), m.n_faces()), (3, 1));
    }

    #[test]
    fn obj_quad_is_unsupported() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, MeshError::UnsupportedPrimitive { .. }));
    }

    #[test]
    fn obj_bad_number_reports_line() {
        let err = parse_obj("v 0 0 0\nv 1 zz 0\n").unwrap_err();
        match err {
            MeshError::Parse { location, .. } => assert_eq!(location, "line 2"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn roundtrips_are_bit_exact() {
        let m = tetrahedron();
        let jitter: Vec<Vec3> = m.positions().iter().map(|p| p * 0.1 + Vec3::repeat(1.0 / 3.0)).collect();
        let m = m.with_positions(jitter);
        let dir = tempfile::tempdir().unwrap();
        for name in ["t.obj", "t.ply"] {
            let path = dir.path().join(name);
            save_mesh(&m, &path).unwrap();
            let back = load_mesh(&path).unwrap();
            assert_eq!(back.positions(), m.positions());
            assert_eq!(back.faces(), m.faces());
        }
        let bin = PlyData::from_mesh(&m).to_binary_le();
        let back = PlyData::parse(&bin).unwrap();
        assert_eq!(back.positions, m.positions());
        assert_eq!(back.triangles().unwrap(), m.faces());
    }

    #[test]
    fn binary_float32_with_normals() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n".to_vec();
        for v in [1.5f32, 2.0, 3.0, 0.0, 0.0, 1.0, -1.0, 0.25, 0.0, 1.0, 0.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let d = PlyData::parse(&bytes).unwrap();
        assert_eq!(d.positions[1], Vec3::new(-1.0, 0.25, 0.0));
        assert_eq!(d.normals.unwrap()[0], Vec3::z());
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n\x00\x00".to_vec();
        assert!(matches!(PlyData::parse(&bytes), Err(MeshError::Parse { .. })));
    }
}
