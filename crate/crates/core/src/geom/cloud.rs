use nalgebra::{Point3, Vector3};

use crate::error::{PasdfError, Result};

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Ordered 3D points with optional per-point unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        });
        Some(Aabb { min, max })
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    /// Box scaled by `factor` about its center.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let half = self.extents() * (0.5 * factor);
        Aabb {
            min: c - half,
            max: c + half,
        }
    }

    pub fn intersect(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        (min.x <= max.x && min.y <= max.y && min.z <= max.z).then_some(Aabb { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    /// Builds a cloud with normals; lengths must agree and every normal must be unit length.
    pub fn with_normals(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(PasdfError::input(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        if let Some((i, n)) = normals
            .iter()
            .enumerate()
            .find(|(_, n)| (n.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE)
        {
            return Err(PasdfError::input(format!(
                "normal {i} has norm {}, expected unit length",
                n.norm()
            )));
        }
        Ok(PointCloud {
            points,
            normals: Some(normals),
        })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn without_normals(&self) -> PointCloud {
        PointCloud::new(self.points.clone())
    }

    pub fn into_parts(self) -> (Vec<Point3<f64>>, Option<Vec<Vector3<f64>>>) {
        (self.points, self.normals)
    }

    /// Errors unless the cloud has at least one point.
    pub fn ensure_non_empty(&self, what: &str) -> Result<()> {
        if self.points.is_empty() {
            Err(PasdfError::input(format!("{what}: point cloud is empty")))
        } else {
            Ok(())
        }
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Subset of points (and normals) at the given indices, in index order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Reverses every normal.
    pub fn flip_normals(&mut self) {
        if let Some(normals) = self.normals.as_mut() {
            normals.iter_mut().for_each(|n| *n = -*n);
        }
    }

    pub(crate) fn from_parts_unchecked(
        points: Vec<Point3<f64>>,
        normals: Option<Vec<Vector3<f64>>>,
    ) -> Self {
        debug_assert!(normals.as_ref().is_none_or(|n| n.len() == points.len()));
        PointCloud { points, normals }
    }
}

impl From<Vec<Point3<f64>>> for PointCloud {
    fn from(points: Vec<Point3<f64>>) -> Self {
        PointCloud::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_or_non_unit_normals() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(PointCloud::with_normals(pts.clone(), vec![Vector3::z()]).is_err());
        assert!(PointCloud::with_normals(pts.clone(), vec![Vector3::z(), Vector3::z() * 2.0]).is_err());
        assert!(PointCloud::with_normals(pts, vec![Vector3::z(), Vector3::x()]).is_ok());
    }

    #[test]
    fn bounds_and_centroid() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 4.0, -2.0)]);
        let bb = cloud.bounds().unwrap();
        assert_eq!(bb.min, Point3::new(0.0, 0.0, -2.0));
        assert_eq!(bb.max, Point3::new(2.0, 4.0, 0.0));
        assert_eq!(cloud.centroid().unwrap(), Point3::new(1.0, 2.0, -1.0));
        assert!(PointCloud::default().ensure_non_empty("test").is_err());
    }
}
