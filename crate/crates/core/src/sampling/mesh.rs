use nalgebra::{Point3, Vector3};

use crate::error::{PasdfError, Result};
use crate::geom::Aabb;

/// Indexed triangle mesh. Faces wind counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates that every face index refers to an existing vertex.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((fi, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&i| i >= n)) {
            return Err(PasdfError::input(format!(
                "face {fi} references vertex {:?} but mesh has {n} vertices",
                f
            )));
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn corners(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Unit normal from counter-clockwise winding; zero for a degenerate face.
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let c = self.face_cross(face);
        let n = c.norm();
        if n > 0.0 {
            c / n
        } else {
            Vector3::zeros()
        }
    }

    pub fn face_normals(&self) -> Vec<Vector3<f64>> {
        (0..self.faces.len()).map(|f| self.face_normal(f)).collect()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Drops faces whose area is at most `min_area`.
    pub fn without_degenerate_faces(&self, min_area: f64) -> TriMesh {
        let faces = (0..self.faces.len())
            .filter(|&f| self.face_area(f) > min_area)
            .map(|f| self.faces[f])
            .collect();
        TriMesh {
            vertices: self.vertices.clone(),
            faces,
        }
    }

    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Same geometry with every face's winding reversed.
    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Signed enclosed volume (positive for outward-facing windings of a closed mesh).
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.corners(f);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }
}
