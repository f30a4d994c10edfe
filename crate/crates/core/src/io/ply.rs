use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{PasdfError, Result};

/// Vertices, optional normals, triangles, and any extra per-vertex scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub points: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<[usize; 3]>,
    /// Extra vertex properties by name, e.g. `anomaly_score`.
    pub scalars: BTreeMap<String, Vec<f64>>,
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
    fn parse(name: &str) -> Option<Scalar> {
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
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> PasdfError {
    PasdfError::Format(format!("{}: {msg}", path.display()))
}

fn read_header(reader: &mut impl BufRead, path: &Path) -> Result<(Encoding, Vec<Element>)> {
    let mut line = String::new();
    let mut next_line = |reader: &mut dyn BufRead| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad(path, "unexpected end of header"));
        }
        Ok(line.trim().to_string())
    };
    if next_line(reader)? != "ply" {
        return Err(bad(path, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(reader)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => encoding = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(Encoding::BinaryLe),
            ["format", other, ..] => return Err(bad(path, format!("unsupported PLY format '{other}'"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(path, format!("bad element count '{count}'")))?,
                properties: Vec::new(),
            }),
            ["property", "list", len, item, name] => {
                let (len, item) = Scalar::parse(len)
                    .zip(Scalar::parse(item))
                    .ok_or_else(|| bad(path, format!("unknown list types in '{l}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad(path, "property before any element"))?
                    .properties
                    .push(Property::List(name.to_string(), len, item));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| bad(path, format!("unknown property type '{ty}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| bad(path, "property before any element"))?
                    .properties
                    .push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(bad(path, format!("unrecognized header line '{l}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| bad(path, "missing format line"))?;
    Ok((encoding, elements))
}

/// One element record: scalar values in property order, plus list payloads.
struct Record {
    scalars: Vec<f64>,
    lists: Vec<Vec<f64>>,
}

struct BodyReader<'a, R: BufRead> {
    reader: &'a mut R,
    encoding: Encoding,
    tokens: std::vec::IntoIter<String>,
    path: &'a Path,
}

impl<R: BufRead> BodyReader<'_, R> {
    fn next_ascii(&mut self) -> Result<f64> {
        loop {
            if let Some(t) = self.tokens.next() {
                return t.parse().map_err(|_| bad(self.path, format!("bad number '{t}'")));
            }
            let mut line = String::new();
            if self.reader.read_line(&mut line)? == 0 {
                return Err(bad(self.path, "unexpected end of data"));
            }
            self.tokens = line.split_whitespace().map(str::to_string).collect::<Vec<_>>().into_iter();
        }
    }

    fn value(&mut self, ty: Scalar) -> Result<f64> {
        match self.encoding {
            Encoding::Ascii => self.next_ascii(),
            Encoding::BinaryLe => {
                let mut buf = [0u8; 8];
                self.reader
                    .read_exact(&mut buf[..ty.size()])
                    .map_err(|_| bad(self.path, "unexpected end of data"))?;
                Ok(ty.read_le(&buf))
            }
        }
    }

    fn record(&mut self, el: &Element) -> Result<Record> {
        let mut rec = Record {
            scalars: Vec::with_capacity(el.properties.len()),
            lists: Vec::new(),
        };
        for p in &el.properties {
            match p {
                Property::Scalar(_, ty) => {
                    let v = self.value(*ty)?;
                    rec.scalars.push(v);
                }
                Property::List(_, len_ty, item_ty) => {
                    let n = self.value(*len_ty)?;
                    if !(n >= 0.0 && n.fract() == 0.0) {
                        return Err(bad(self.path, format!("bad list length {n}")));
                    }
                    let items = (0..n as usize).map(|_| self.value(*item_ty)).collect::<Result<Vec<_>>>()?;
                    rec.scalars.push(f64::NAN);
                    rec.lists.push(items);
                }
            }
        }
        Ok(rec)
    }
}

/// Reads an ASCII or binary little-endian PLY file. Polygons are fan-triangulated.
pub fn read_ply(path: &Path) -> Result<PlyData> {
    let mut reader = BufReader::new(File::open(path)?);
    let (encoding, elements) = read_header(&mut reader, path)?;
    let mut body = BodyReader {
        reader: &mut reader,
        encoding,
        tokens: Vec::new().into_iter(),
        path,
    };
    let mut data = PlyData::default();
    for el in &elements {
        let names: Vec<&str> = el
            .properties
            .iter()
            .map(|p| match p {
                Property::Scalar(n, _) | Property::List(n, _, _) => n.as_str(),
            })
            .collect();
        let col = |n: &str| names.iter().position(|&x| x == n);
        match el.name.as_str() {
            "vertex" => {
                let (x, y, z) = match (col("x"), col("y"), col("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(bad(path, "vertex element lacks x/y/z")),
                };
                let normal_cols = col("nx").zip(col("ny")).zip(col("nz")).map(|((a, b), c)| [a, b, c]);
                let extra: Vec<(usize, &str)> = names
                    .iter()
                    .enumerate()
                    .filter(|(i, n)| {
                        ![x, y, z].contains(i)
                            && !normal_cols.is_some_and(|c| c.contains(i))
                            && matches!(el.properties[*i], Property::Scalar(..))
                            && !n.is_empty()
                    })
                    .map(|(i, n)| (i, *n))
                    .collect();
                let mut normals = Vec::new();
                for _ in 0..el.count {
                    let r = body.record(el)?;
                    data.points.push(Point3::new(r.scalars[x], r.scalars[y], r.scalars[z]));
                    if let Some([a, b, c]) = normal_cols {
                        normals.push(Vector3::new(r.scalars[a], r.scalars[b], r.scalars[c]));
                    }
                    for &(i, n) in &extra {
                        data.scalars.entry(n.to_string()).or_default().push(r.scalars[i]);
                    }
                }
                if normal_cols.is_some() {
                    data.normals = Some(normals);
                }
            }
            "face" => {
                let list = el
                    .properties
                    .iter()
                    .filter(|p| matches!(p, Property::List(..)))
                    .position(|p| matches!(p, Property::List(n, ..) if n == "vertex_indices" || n == "vertex_index"))
                    .ok_or_else(|| bad(path, "face element lacks vertex_indices"))?;
                for _ in 0..el.count {
                    let r = body.record(el)?;
                    let idx = &r.lists[list];
                    if idx.len() < 3 {
                        return Err(bad(path, format!("face with {} vertices", idx.len())));
                    }
                    let to_usize = |v: f64| {
                        if v >= 0.0 && v.fract() == 0.0 {
                            Ok(v as usize)
                        } else {
                            Err(bad(path, format!("bad vertex index {v}")))
                        }
                    };
                    let first = to_usize(idx[0])?;
                    for w in idx[1..].windows(2) {
                        data.faces.push([first, to_usize(w[0])?, to_usize(w[1])?]);
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    body.record(el)?;
                }
            }
        }
    }
    if let Some(&bad_face) = data.faces.iter().flatten().find(|&&i| i >= data.points.len()) {
        return Err(bad(path, format!("face index {bad_face} out of range")));
    }
    Ok(data)
}

/// Writes binary little-endian PLY: double coordinates and normals, float
/// extra scalars, `uchar int` face lists.
pub fn write_ply(path: &Path, data: &PlyData) -> Result<()> {
    let n = data.points.len();
    if data.normals.as_ref().is_some_and(|v| v.len() != n) || data.scalars.values().any(|v| v.len() != n) {
        return Err(PasdfError::input("PLY vertex attributes must match the vertex count"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {n}")?;
    for a in ["x", "y", "z"] {
        writeln!(w, "property double {a}")?;
    }
    if data.normals.is_some() {
        for a in ["nx", "ny", "nz"] {
            writeln!(w, "property double {a}")?;
        }
    }
    for name in data.scalars.keys() {
        writeln!(w, "property float {name}")?;
    }
    if !data.faces.is_empty() {
        writeln!(w, "element face {}\nproperty list uchar int vertex_indices", data.faces.len())?;
    }
    writeln!(w, "end_header")?;
    let columns: Vec<&Vec<f64>> = data.scalars.values().collect();
    for i in 0..n {
        for c in data.points[i].iter() {
            w.write_all(&c.to_le_bytes())?;
        }
        if let Some(normals) = &data.normals {
            for c in normals[i].iter() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        for col in &columns {
            w.write_all(&(col[i] as f32).to_le_bytes())?;
        }
    }
    for f in &data.faces {
        w.write_all(&[3u8])?;
        for &i in f {
            let i = i32::try_from(i).map_err(|_| PasdfError::input("face index exceeds the PLY int range"))?;
            w.write_all(&i.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_with_quads_and_extra_elements() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
             property uchar red\nelement face 1\nproperty list uchar int vertex_indices\nelement edge 1\n\
             property int v1\nproperty int v2\nend_header\n0 0 0 255\n1 0 0 0\n1 1 0 0\n0 1 0 0\n4 0 1 2 3\n0 1\n",
        )
        .unwrap();
        let d = read_ply(&path).unwrap();
        assert_eq!(d.points.len(), 4);
        assert_eq!(d.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(d.scalars["red"], vec![255.0, 0.0, 0.0, 0.0]);
        assert!(d.normals.is_none());
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.ply");
        let mut data = PlyData {
            points: vec![Point3::new(0.1, -2.5, 3.25), Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.0, 1e-9)],
            normals: Some(vec![Vector3::x(), Vector3::y(), Vector3::z()]),
            faces: vec![[0, 1, 2]],
            scalars: BTreeMap::new(),
        };
        data.scalars.insert("anomaly_score".into(), vec![0.5, 0.25, 0.125]);
        write_ply(&path, &data).unwrap();
        assert_eq!(read_ply(&path).unwrap(), data);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        std::fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 1\n").unwrap();
        assert!(matches!(read_ply(&path), Err(PasdfError::Format(_))));
        std::fs::write(&path, "not a ply\n").unwrap();
        assert!(matches!(read_ply(&path), Err(PasdfError::Format(_))));
        std::fs::write(&path, "ply\nformat binary_big_endian 1.0\nend_header\n").unwrap();
        assert!(matches!(read_ply(&path), Err(PasdfError::Format(_))));
        assert!(matches!(read_ply(&dir.path().join("missing.ply")), Err(PasdfError::Io(_))));
    }

    #[test]
    fn out_of_range_face_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\n\
             element face 1\nproperty list uchar uint vertex_index\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n",
        )
        .unwrap();
        assert!(matches!(read_ply(&path), Err(PasdfError::Format(_))));
    }
}
