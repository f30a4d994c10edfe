//! PLY/OBJ meshes and clouds, query-sample streams.

mod obj;
mod ply;
mod queries;

use std::path::Path;

pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, write_ply, PlyData};
pub use queries::{
    load_query_set, read_queries, save_query_set, sidecar_path, tier_counts, write_queries, QuerySidecar,
    QUERY_RECORD_BYTES,
};

use crate::error::{PasdfError, Result};
use crate::geom::PointCloud;
use crate::sampling::TriMesh;

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Either a mesh (the file has faces) or a bare cloud.
#[derive(Debug, Clone)]
pub enum Shape3d {
    Mesh(TriMesh),
    Cloud(PointCloud),
}

/// Loads a `.ply` or `.obj` file. Normals in PLY files are renormalized and
/// dropped if any is degenerate.
pub fn load_shape(path: &Path) -> Result<Shape3d> {
    let (points, normals, faces) = match extension(path).as_str() {
        "ply" => {
            let d = read_ply(path)?;
            (d.points, d.normals, d.faces)
        }
        "obj" => {
            let (v, f) = read_obj(path)?;
            (v, None, f)
        }
        other => return Err(PasdfError::Format(format!("{}: unsupported extension '{other}'", path.display()))),
    };
    if points.is_empty() {
        return Err(PasdfError::Format(format!("{}: no vertices", path.display())));
    }
    if !faces.is_empty() {
        return Ok(Shape3d::Mesh(TriMesh::new(points, faces)?));
    }
    let normals = normals.and_then(|ns| ns.iter().map(|n| n.try_normalize(1e-12)).collect::<Option<Vec<_>>>());
    Ok(Shape3d::Cloud(match normals {
        Some(ns) => PointCloud::with_normals(points, ns)?,
        None => PointCloud::new(points),
    }))
}

/// The file's points, ignoring faces.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    Ok(match load_shape(path)? {
        Shape3d::Cloud(c) => c,
        Shape3d::Mesh(m) => PointCloud::new(m.vertices().to_vec()),
    })
}

/// Writes a cloud as binary PLY, with an `anomaly_score` property when scores are given.
pub fn save_cloud(path: &Path, cloud: &PointCloud, scores: Option<&[f64]>) -> Result<()> {
    let mut data = PlyData {
        points: cloud.points().to_vec(),
        normals: cloud.normals().map(<[_]>::to_vec),
        ..PlyData::default()
    };
    if let Some(s) = scores {
        data.scalars.insert("anomaly_score".into(), s.to_vec());
    }
    write_ply(path, &data)
}

/// Writes a mesh as `.obj` or binary `.ply`, by extension.
pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    match extension(path).as_str() {
        "obj" => write_obj(path, mesh),
        "ply" => write_ply(
            path,
            &PlyData {
                points: mesh.vertices().to_vec(),
                faces: mesh.faces().to_vec(),
                ..PlyData::default()
            },
        ),
        other => Err(PasdfError::Format(format!("{}: unsupported extension '{other}'", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_shape, ShapeSpec};

    #[test]
    fn mesh_and_cloud_dispatch() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = generate_shape(&ShapeSpec::sphere(0.3), 0).unwrap();
        for name in ["m.obj", "m.ply"] {
            let p = dir.path().join(name);
            save_mesh(&p, &mesh).unwrap();
            match load_shape(&p).unwrap() {
                Shape3d::Mesh(m) => assert_eq!(m.faces(), mesh.faces()),
                Shape3d::Cloud(_) => panic!("{name} lost its faces"),
            }
        }
        let cloud = crate::sampling::sample_surface(&mesh, 100, 1).unwrap();
        let p = dir.path().join("c.ply");
        save_cloud(&p, &cloud, Some(&vec![0.5; 100])).unwrap();
        let back = load_cloud(&p).unwrap();
        assert_eq!(back.points(), cloud.points());
        assert!(back.has_normals());
        assert_eq!(read_ply(&p).unwrap().scalars["anomaly_score"], vec![0.5; 100]);
        assert!(load_shape(&dir.path().join("x.stl")).is_err());
    }
}
