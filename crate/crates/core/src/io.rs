//! Point cloud and mesh files.
//!
//! Clouds load from PLY (ASCII or binary little-endian) or whitespace XYZ
//! text. Meshes read and write OBJ and binary PLY. Writers go through a
//! temporary file in the target directory and rename it into place.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{self, Point3};
use crate::mesher::Mesh;
use crate::pyramid::PointCloud;

/// Normals farther than this from unit length are reported.
pub const NORMAL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub warnings: Vec<String>,
}

/// Writes `path` by filling a temporary sibling and renaming it over the
/// target once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn load_cloud(path: &Path) -> Result<LoadedCloud> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"ply") {
        return parse_ply_cloud(&bytes);
    }
    match extension(path).as_str() {
        "xyz" | "txt" | "pts" => parse_xyz(&String::from_utf8_lossy(&bytes)),
        "ply" => Err(Error::parse("line 1", "missing ply magic")),
        other => Err(Error::UnsupportedFormat(format!("point cloud extension '{other}'"))),
    }
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let bytes = fs::read(path)?;
    match extension(path).as_str() {
        "ply" => parse_ply_mesh(&bytes),
        "obj" => parse_obj(&String::from_utf8_lossy(&bytes)),
        other => Err(Error::UnsupportedFormat(format!("mesh extension '{other}'"))),
    }
}

/// Binary little-endian PLY with `double` coordinates, plus normals when the
/// cloud has them.
pub fn write_cloud_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_atomic(path, |w| encode_cloud_ply(w, cloud))
}

pub fn encode_cloud_ply(w: &mut dyn Write, cloud: &PointCloud) -> Result<()> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        cloud.len()
    );
    if cloud.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    for (i, p) in cloud.positions.iter().enumerate() {
        for c in p {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(n) = &cloud.normals {
            for c in n[i] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_mesh_ply(path: &Path, mesh: &Mesh) -> Result<()> {
    write_atomic(path, |w| encode_mesh_ply(w, mesh))
}

pub fn encode_mesh_ply(w: &mut dyn Write, mesh: &Mesh) -> Result<()> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    w.write_all(header.as_bytes())?;
    for v in &mesh.vertices {
        for c in v {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for t in &mesh.triangles {
        w.write_all(&[3])?;
        for i in t {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_mesh_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    write_atomic(path, |w| encode_mesh_obj(w, mesh))
}

/// OBJ text with 1-based indices. `{:?}` formatting prints the shortest
/// string that reads back to the same `f64`.
pub fn encode_mesh_obj(w: &mut dyn Write, mesh: &Mesh) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {:?} {:?} {:?}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_xyz(path: &Path, points: &[Point3]) -> Result<()> {
    write_atomic(path, |w| {
        for p in points {
            writeln!(w, "{:?} {:?} {:?}", p[0], p[1], p[2])?;
        }
        Ok(())
    })
}

fn parse_f64(tok: &str, loc: impl Fn() -> String) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(loc(), format!("'{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(loc(), format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

/// Normalizes `normals` in place. Returns a warning when any was off unit
/// length by more than [`NORMAL_TOLERANCE`].
fn renormalize(normals: &mut [Point3], loc: impl Fn(usize) -> String) -> Result<Option<String>> {
    let mut off = 0;
    for (i, n) in normals.iter_mut().enumerate() {
        let len = geom::norm(*n);
        if (len - 1.0).abs() > NORMAL_TOLERANCE {
            off += 1;
        }
        *n = geom::normalize(*n).ok_or_else(|| Error::parse(loc(i), "zero-length normal"))?;
    }
    Ok((off > 0).then(|| format!("renormalized {off} normals that were not unit length")))
}

pub fn parse_xyz(text: &str) -> Result<LoadedCloud> {
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", i + 1);
        let vals = line
            .split_whitespace()
            .map(|t| parse_f64(t, loc))
            .collect::<Result<Vec<_>>>()?;
        match vals.len() {
            3 => positions.push([vals[0], vals[1], vals[2]]),
            6 => {
                positions.push([vals[0], vals[1], vals[2]]);
                normals.push([vals[3], vals[4], vals[5]]);
            }
            n => return Err(Error::parse(loc(), format!("expected 3 or 6 values, found {n}"))),
        }
    }
    if !normals.is_empty() && normals.len() != positions.len() {
        return Err(Error::parse("file", "only some records carry normals"));
    }
    finish_cloud(positions, normals, |i| format!("record {}", i + 1))
}

fn finish_cloud(
    positions: Vec<Point3>,
    mut normals: Vec<Point3>,
    loc: impl Fn(usize) -> String,
) -> Result<LoadedCloud> {
    let mut warnings = Vec::new();
    let cloud = if normals.is_empty() {
        PointCloud::new(positions)
    } else {
        warnings.extend(renormalize(&mut normals, loc)?);
        PointCloud::with_normals(positions, normals)
    };
    Ok(LoadedCloud { cloud, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    /// Byte offset of the body.
    body: usize,
    /// Line number of the first body line, for ASCII diagnostics.
    body_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(format!("line {}", line_no + 1), "header has no end_header"))?;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        line_no += 1;
        let loc = || format!("line {line_no}");
        let line = std::str::from_utf8(raw)
            .map_err(|_| Error::parse(loc(), "header is not text"))?
            .trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            _ if line_no == 1 => {
                if line != "ply" {
                    return Err(Error::parse(loc(), "missing ply magic"));
                }
            }
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some(other) => return Err(Error::UnsupportedFormat(format!("ply format {other}"))),
                    None => return Err(Error::parse(loc(), "format line has no encoding")),
                });
            }
            Some("element") => {
                if toks.len() != 3 {
                    return Err(Error::parse(loc(), "expected 'element <name> <count>'"));
                }
                let count = toks[2]
                    .parse()
                    .map_err(|_| Error::parse(loc(), format!("bad element count '{}'", toks[2])))?;
                elements.push(Element {
                    name: toks[1].to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc(), "property before any element"))?;
                let ty = |name: &str| {
                    Scalar::from_name(name).ok_or_else(|| Error::parse(loc(), format!("unknown type '{name}'")))
                };
                let prop = match toks.as_slice() {
                    ["property", "list", c, i, name] => Property {
                        name: name.to_string(),
                        kind: PropKind::List {
                            count: ty(c)?,
                            item: ty(i)?,
                        },
                    },
                    ["property", t, name] => Property {
                        name: name.to_string(),
                        kind: PropKind::Scalar(ty(t)?),
                    },
                    _ => return Err(Error::parse(loc(), "malformed property line")),
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(loc(), format!("unexpected header keyword '{other}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse("header", "no format line"))?;
    Ok(Header {
        encoding,
        elements,
        body: pos,
        body_line: line_no + 1,
    })
}

/// One parsed element row: scalar properties in place, lists as slices of
/// `lists`.
struct Row {
    values: Vec<f64>,
    lists: Vec<Vec<f64>>,
}

/// Walks the body and hands each row of each element to `visit`.
fn read_body<F>(bytes: &[u8], header: &Header, mut visit: F) -> Result<()>
where
    F: FnMut(usize, usize, &Row, &dyn Fn() -> String) -> Result<()>,
{
    let mut row = Row {
        values: Vec::new(),
        lists: Vec::new(),
    };
    match header.encoding {
        Encoding::BinaryLe => {
            let mut pos = header.body;
            for (e, el) in header.elements.iter().enumerate() {
                for r in 0..el.count {
                    let start = pos;
                    let loc = || format!("byte {start}");
                    row.values.clear();
                    row.lists.clear();
                    let take = |s: Scalar, pos: &mut usize| -> Result<f64> {
                        let end = *pos + s.size();
                        if end > bytes.len() {
                            return Err(Error::parse(
                                format!("byte {}", *pos),
                                format!("file ends inside {} {}", el.name, r),
                            ));
                        }
                        let v = s.read_le(&bytes[*pos..end]);
                        *pos = end;
                        Ok(v)
                    };
                    for p in &el.props {
                        match p.kind {
                            PropKind::Scalar(s) => {
                                let v = take(s, &mut pos)?;
                                row.values.push(v);
                            }
                            PropKind::List { count, item } => {
                                let n = take(count, &mut pos)?;
                                if n < 0.0 {
                                    return Err(Error::parse(loc(), "negative list length"));
                                }
                                let list = (0..n as usize)
                                    .map(|_| take(item, &mut pos))
                                    .collect::<Result<Vec<_>>>()?;
                                row.values.push(row.lists.len() as f64);
                                row.lists.push(list);
                            }
                        }
                    }
                    visit(e, r, &row, &loc)?;
                }
            }
            if pos != bytes.len() {
                return Err(Error::parse(
                    format!("byte {pos}"),
                    format!("{} trailing bytes after the last element", bytes.len() - pos),
                ));
            }
        }
        Encoding::Ascii => {
            let text = std::str::from_utf8(&bytes[header.body..])
                .map_err(|_| Error::parse(format!("line {}", header.body_line), "body is not text"))?;
            let mut lines = text
                .lines()
                .enumerate()
                .map(|(i, l)| (header.body_line + i, l))
                .filter(|(_, l)| !l.trim().is_empty());
            for (e, el) in header.elements.iter().enumerate() {
                for r in 0..el.count {
                    let (line_no, line) = lines.next().ok_or_else(|| {
                        Error::parse("end of file", format!("expected {} {} rows, found {r}", el.count, el.name))
                    })?;
                    let loc = || format!("line {line_no}");
                    row.values.clear();
                    row.lists.clear();
                    let mut toks = line.split_whitespace();
                    let mut next = || -> Result<f64> {
                        let t = toks
                            .next()
                            .ok_or_else(|| Error::parse(loc(), format!("too few values for {}", el.name)))?;
                        parse_f64(t, loc)
                    };
                    for p in &el.props {
                        match p.kind {
                            PropKind::Scalar(_) => {
                                let v = next()?;
                                row.values.push(v);
                            }
                            PropKind::List { .. } => {
                                let n = next()?;
                                if n < 0.0 || n.fract() != 0.0 {
                                    return Err(Error::parse(loc(), "bad list length"));
                                }
                                let list = (0..n as usize).map(|_| next()).collect::<Result<Vec<_>>>()?;
                                row.values.push(row.lists.len() as f64);
                                row.lists.push(list);
                            }
                        }
                    }
                    if toks.next().is_some() {
                        return Err(Error::parse(loc(), format!("too many values for {}", el.name)));
                    }
                    visit(e, r, &row, &loc)?;
                }
            }
            if let Some((line_no, _)) = lines.next() {
                return Err(Error::parse(format!("line {line_no}"), "data after the last element"));
            }
        }
    }
    Ok(())
}

fn vertex_layout(header: &Header) -> Result<(usize, [usize; 3], Option<[usize; 3]>)> {
    let e = header
        .elements
        .iter()
        .position(|el| el.name == "vertex")
        .ok_or_else(|| Error::parse("header", "no vertex element"))?;
    let el = &header.elements[e];
    let find = |name: &str| {
        el.props
            .iter()
            .position(|p| p.name == name && matches!(p.kind, PropKind::Scalar(_)))
    };
    let pos = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(Error::parse("header", "vertex element lacks x/y/z")),
    };
    let normals = match (find("nx"), find("ny"), find("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        (None, None, None) => None,
        _ => return Err(Error::parse("header", "vertex element has partial normals")),
    };
    Ok((e, pos, normals))
}

fn check_finite(p: Point3, loc: &dyn Fn() -> String) -> Result<Point3> {
    if geom::is_finite(p) {
        Ok(p)
    } else {
        Err(Error::parse(loc(), "non-finite coordinate"))
    }
}

pub fn parse_ply_cloud(bytes: &[u8]) -> Result<LoadedCloud> {
    let header = parse_header(bytes)?;
    let (ve, pos_idx, normal_idx) = vertex_layout(&header)?;
    let n = header.elements[ve].count;
    let mut positions = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(if normal_idx.is_some() { n } else { 0 });
    read_body(bytes, &header, |e, _, row, loc| {
        if e == ve {
            positions.push(check_finite(pos_idx.map(|i| row.values[i]), loc)?);
            if let Some(ni) = normal_idx {
                normals.push(check_finite(ni.map(|i| row.values[i]), loc)?);
            }
        }
        Ok(())
    })?;
    finish_cloud(positions, normals, |i| format!("vertex {i}"))
}

pub fn parse_ply_mesh(bytes: &[u8]) -> Result<Mesh> {
    let header = parse_header(bytes)?;
    let (ve, pos_idx, _) = vertex_layout(&header)?;
    let fe = header.elements.iter().position(|el| el.name == "face");
    let face_prop = match fe {
        Some(f) => Some(
            header.elements[f]
                .props
                .iter()
                .position(|p| {
                    matches!(p.kind, PropKind::List { .. })
                        && (p.name == "vertex_indices" || p.name == "vertex_index")
                })
                .ok_or_else(|| Error::parse("header", "face element lacks vertex_indices"))?,
        ),
        None => None,
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    read_body(bytes, &header, |e, _, row, loc| {
        if e == ve {
            vertices.push(check_finite(pos_idx.map(|i| row.values[i]), loc)?);
        } else if Some(e) == fe {
            let list = &row.lists[row.values[face_prop.unwrap()] as usize];
            let idx = list
                .iter()
                .map(|&v| {
                    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                        Err(Error::parse(loc(), format!("bad vertex index {v}")))
                    } else {
                        Ok(v as u32)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            fan(&idx, &mut triangles, loc)?;
        }
        Ok(())
    })?;
    Mesh::new(vertices, triangles).map_err(|e| Error::parse("faces", e.to_string()))
}

fn fan(idx: &[u32], out: &mut Vec<[u32; 3]>, loc: &dyn Fn() -> String) -> Result<()> {
    if idx.len() < 3 {
        return Err(Error::parse(loc(), "face with fewer than 3 vertices"));
    }
    for i in 1..idx.len() - 1 {
        out.push([idx[0], idx[i], idx[i + 1]]);
    }
    Ok(())
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let loc = || format!("line {}", i + 1);
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals = toks.map(|t| parse_f64(t, loc)).collect::<Result<Vec<_>>>()?;
                // A fourth value is the optional homogeneous weight.
                if !(3..=4).contains(&vals.len()) {
                    return Err(Error::parse(loc(), "vertex needs 3 coordinates"));
                }
                vertices.push([vals[0], vals[1], vals[2]]);
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let idx = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let v: i64 = head
                            .parse()
                            .map_err(|_| Error::parse(loc(), format!("bad face index '{t}'")))?;
                        let resolved = if v < 0 { n + v } else { v - 1 };
                        if v == 0 || resolved < 0 || resolved >= n {
                            return Err(Error::parse(loc(), format!("face index {v} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<_>>>()?;
                fan(&idx, &mut triangles, &loc)?;
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles).map_err(|e| Error::parse("faces", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [0, 1, 2].map(|_| rng.random_range(-10.0..10.0))).collect()
    }

    fn bits(p: &[Point3]) -> Vec<[u64; 3]> {
        p.iter().map(|v| v.map(f64::to_bits)).collect()
    }

    fn tetra() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn binary_ply_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let mut pts = random_points(500, 1);
        pts[0] = [f64::MIN_POSITIVE, -0.0, 1e300];
        let cloud = PointCloud::new(pts.clone());
        write_cloud_ply(&path, &cloud).unwrap();
        let back = load_cloud(&path).unwrap();
        assert!(back.cloud.normals.is_none());
        assert!(back.warnings.is_empty());
        assert_eq!(bits(&back.cloud.positions), bits(&pts));
    }

    #[test]
    fn normals_round_trip_and_renormalize() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.ply");
        let pts = random_points(3, 2);
        let normals = vec![[0.0, 0.0, 1.0], [0.0, 2.0, 0.0], [3.0, 0.0, 4.0]];
        write_cloud_ply(&path, &PointCloud::with_normals(pts, normals)).unwrap();
        let back = load_cloud(&path).unwrap();
        assert_eq!(back.warnings.len(), 1);
        let n = back.cloud.normals.unwrap();
        for v in &n {
            assert!((geom::norm(*v) - 1.0).abs() < 1e-3);
        }
        assert!(geom::dist(n[2], [0.6, 0.0, 0.8]) < 1e-15);
    }

    #[test]
    fn ascii_ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty float nx\nproperty float ny\nproperty float nz\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n1 2 3 255 0 0 1\n4 5 6 0 1 0 0\n3 0 1 1\n";
        let c = parse_ply_cloud(text.as_bytes()).unwrap();
        assert_eq!(c.cloud.positions, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert_eq!(c.cloud.normals.unwrap()[1], [1.0, 0.0, 0.0]);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn ascii_ply_errors_name_the_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n4 five 6\n";
        match parse_ply_cloud(text.as_bytes()) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 9"),
            other => panic!("{other:?}"),
        }
        let short = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(matches!(parse_ply_cloud(short.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn binary_ply_truncation_names_the_offset() {
        let mut buf = Vec::new();
        encode_cloud_ply(&mut buf, &PointCloud::new(random_points(2, 3))).unwrap();
        buf.truncate(buf.len() - 4);
        match parse_ply_cloud(&buf) {
            Err(Error::Parse { location, .. }) => assert!(location.starts_with("byte ")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_inputs() {
        let be = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(parse_ply_cloud(be.as_bytes()), Err(Error::UnsupportedFormat(_))));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.las");
        fs::write(&path, "junk").unwrap();
        assert!(matches!(load_cloud(&path), Err(Error::UnsupportedFormat(_))));
        let nox = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float y\nend_header\n";
        assert!(parse_ply_cloud(nox.as_bytes()).is_err());
    }

    #[test]
    fn xyz_in_order() {
        let c = parse_xyz("1 2 3\n\n# note\n4 5 6\n-7 8e-1 9\n").unwrap();
        assert_eq!(c.cloud.positions, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [-7.0, 0.8, 9.0]]);
        assert!(c.cloud.normals.is_none());
        match parse_xyz("1 2 3\n1 2\n") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
        assert!(parse_xyz("1 2 nan\n").is_err());
    }

    #[test]
    fn xyz_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.xyz");
        let pts = random_points(100, 4);
        write_xyz(&path, &pts).unwrap();
        assert_eq!(bits(&load_cloud(&path).unwrap().cloud.positions), bits(&pts));
    }

    #[test]
    fn mesh_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut mesh = tetra();
        mesh.vertices[1] = [0.1 + 0.2, 1.0 / 3.0, -1e-17];
        for name in ["m.ply", "m.obj"] {
            let path = dir.path().join(name);
            if name.ends_with("ply") {
                write_mesh_ply(&path, &mesh).unwrap();
            } else {
                write_mesh_obj(&path, &mesh).unwrap();
            }
            let back = load_mesh(&path).unwrap();
            assert_eq!(back.triangles, mesh.triangles);
            assert_eq!(bits(&back.vertices), bits(&mesh.vertices));
        }
    }

    #[test]
    fn obj_is_one_based_and_fans_polygons() {
        let mut buf = Vec::new();
        encode_mesh_obj(&mut buf, &tetra()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("f 1 3 2\n"));
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n";
        let m = parse_obj(quad).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        match parse_obj("v 0 0 0\nf 1 2 3\n") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_write_leaves_target_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("keep.txt");
        fs::write(&path, "old").unwrap();
        let r = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(Error::EmptySet)
        });
        assert!(r.is_err());
        assert_eq!(fs::read_to_string(&path).unwrap(), "old");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
