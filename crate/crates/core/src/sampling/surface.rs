use nalgebra::Point3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriMesh;
use crate::error::{PasdfError, Result};
use crate::geom::PointCloud;

/// Surface samples together with the face each one came from.
#[derive(Debug, Clone)]
pub struct SurfaceSamples {
    pub cloud: PointCloud,
    pub faces: Vec<usize>,
}

/// Area-weighted uniform sampling of the mesh surface. Each point carries the
/// normal of its face.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(sample_surface_with_faces(mesh, n, seed)?.cloud)
}

pub fn sample_surface_with_faces(mesh: &TriMesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface_rng(mesh, n, &mut rng)
}

pub(crate) fn sample_surface_rng(mesh: &TriMesh, n: usize, rng: &mut impl Rng) -> Result<SurfaceSamples> {
    if n == 0 {
        return Err(PasdfError::param("surface sample count must be at least 1"));
    }
    let areas = mesh.face_areas();
    let picker = WeightedIndex::new(&areas)
        .map_err(|e| PasdfError::input(format!("cannot sample mesh surface: {e}")))?;
    let normals = mesh.face_normals();

    let mut points = Vec::with_capacity(n);
    let mut point_normals = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let f = picker.sample(rng);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = mesh.corners(f);
        points.push(a + (b - a) * u + (c - a) * v);
        point_normals.push(normals[f]);
        faces.push(f);
    }
    Ok(SurfaceSamples {
        cloud: PointCloud::from_parts_unchecked(points, Some(point_normals)),
        faces,
    })
}

/// Barycentric coordinates of `p` with respect to triangle `(a, b, c)`.
pub fn barycentric(p: &Point3<f64>, [a, b, c]: [Point3<f64>; 3]) -> [f64; 3] {
    let (v0, v1, v2) = (b - a, c - a, p - a);
    let (d00, d01, d11) = (v0.dot(&v0), v0.dot(&v1), v1.dot(&v1));
    let (d20, d21) = (v2.dot(&v0), v2.dot(&v1));
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}
