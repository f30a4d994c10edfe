use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{PasdfError, Result};
use crate::sampling::TriMesh;

/// Vertices and faces of a Wavefront OBJ file; polygons are fan-triangulated,
/// texture/normal references and other records are ignored.
pub fn read_obj(path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[usize; 3]>)> {
    let reader = BufReader::new(File::open(path)?);
    let bad = |line: usize, msg: String| PasdfError::Format(format!("{}:{line}: {msg}", path.display()));
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse().map_err(|_| bad(n + 1, format!("bad coordinate '{t}'"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad(n + 1, "vertex needs three coordinates".into()));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| bad(n + 1, format!("bad face index '{t}'")))?;
                        let resolved = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                        if i == 0 || resolved < 0 || resolved >= vertices.len() as i64 {
                            return Err(bad(n + 1, format!("face index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad(n + 1, "face needs at least three vertices".into()));
                }
                for w in idx[1..].windows(2) {
                    faces.push([idx[0], w[0], w[1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in mesh.vertices() {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}
