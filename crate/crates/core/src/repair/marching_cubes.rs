use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tables::{EDGE_TABLE, TRI_TABLE};
use crate::error::{PasdfError, Result};
use crate::geom::Aabb;
use crate::sampling::TriMesh;

pub const MIN_GRID_RESOLUTION: usize = 8;

/// Regular sampling lattice: `resolution` vertices per axis spanning `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::unit(128)
    }
}

impl GridSpec {
    /// Over the unit cube.
    pub fn unit(resolution: usize) -> Self {
        GridSpec {
            resolution,
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn with_bounds(resolution: usize, bounds: &Aabb) -> Self {
        GridSpec {
            resolution,
            min: bounds.min.coords.into(),
            max: bounds.max.coords.into(),
        }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            min: Point3::from(self.min),
            max: Point3::from(self.max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_GRID_RESOLUTION {
            return Err(PasdfError::param(format!(
                "grid resolution {} is below the minimum of {MIN_GRID_RESOLUTION}",
                self.resolution
            )));
        }
        if !(0..3).all(|a| self.max[a] > self.min[a] && self.min[a].is_finite() && self.max[a].is_finite()) {
            return Err(PasdfError::param("grid bounds must be a non-degenerate finite box"));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.resolution.pow(3)
    }

    /// Cell edge per axis.
    pub fn spacing(&self) -> [f64; 3] {
        let d = (self.resolution - 1) as f64;
        [0, 1, 2].map(|a| (self.max[a] - self.min[a]) / d)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        let h = self.spacing();
        Point3::new(
            self.min[0] + i as f64 * h[0],
            self.min[1] + j as f64 * h[1],
            self.min[2] + k as f64 * h[2],
        )
    }

    /// All lattice points, x fastest.
    pub fn points(&self) -> Vec<Point3<f64>> {
        let r = self.resolution;
        (0..r)
            .flat_map(|k| (0..r).flat_map(move |j| (0..r).map(move |i| (i, j, k))))
            .map(|(i, j, k)| self.point(i, j, k))
            .collect()
    }
}

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Endpoint corners of each cube edge.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [3, 2],
    [0, 3],
    [4, 5],
    [5, 6],
    [7, 6],
    [4, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extracts the `iso` level set from lattice values (x fastest). Triangles are
/// wound so their normals point toward increasing field values; crossings are
/// welded, so shared edges produce shared vertices.
pub fn marching_cubes_values(values: &[f64], grid: &GridSpec, iso: f64) -> Result<TriMesh> {
    grid.validate()?;
    if values.len() != grid.vertex_count() {
        return Err(PasdfError::input(format!(
            "{} field values for a {}^3 grid",
            values.len(),
            grid.resolution
        )));
    }
    let r = grid.resolution;
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(PasdfError::NonFiniteField {
            i: bad % r,
            j: (bad / r) % r,
            k: bad / (r * r),
        });
    }

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Keyed by the lower lattice endpoint of an edge plus its axis.
    let mut welded: HashMap<(usize, u8), usize> = HashMap::new();

    for k in 0..r - 1 {
        for j in 0..r - 1 {
            for i in 0..r - 1 {
                let corner = |c: usize| {
                    let [di, dj, dk] = CORNERS[c];
                    grid.index(i + di, j + dj, k + dk)
                };
                let mut case = 0usize;
                for c in 0..8 {
                    if values[corner(c)] < iso {
                        case |= 1 << c;
                    }
                }
                let crossed = EDGE_TABLE[case];
                if crossed == 0 {
                    continue;
                }
                let mut edge_vertex = [usize::MAX; 12];
                for (e, [c0, c1]) in EDGES.iter().enumerate() {
                    if crossed & (1 << e) == 0 {
                        continue;
                    }
                    let (g0, g1) = (corner(*c0), corner(*c1));
                    let axis = (0..3).find(|&a| CORNERS[*c0][a] != CORNERS[*c1][a]).expect("edge spans an axis") as u8;
                    edge_vertex[e] = *welded.entry((g0, axis)).or_insert_with(|| {
                        let (v0, v1) = (values[g0], values[g1]);
                        let t = if v1 != v0 { ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0) } else { 0.5 };
                        let [a, b, c] = CORNERS[*c0];
                        let [d, e2, f] = CORNERS[*c1];
                        let p0 = grid.point(i + a, j + b, k + c);
                        let p1 = grid.point(i + d, j + e2, k + f);
                        vertices.push(p0 + (p1 - p0) * t);
                        vertices.len() - 1
                    });
                }
                for tri in TRI_TABLE[case].chunks(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let (a, b, c) = (
                        edge_vertex[tri[0] as usize],
                        edge_vertex[tri[1] as usize],
                        edge_vertex[tri[2] as usize],
                    );
                    // The table winds toward the low (inside) corners; reverse it.
                    if a != b && b != c && a != c {
                        faces.push([a, c, b]);
                    }
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}

/// Samples `field` on the lattice (in parallel, order-preserving) and extracts the level set.
pub fn marching_cubes<F>(field: F, grid: &GridSpec, iso: f64) -> Result<TriMesh>
where
    F: Fn(&Point3<f64>) -> f64 + Sync + Send,
{
    grid.validate()?;
    let values: Vec<f64> = grid.points().par_iter().map(field).collect();
    marching_cubes_values(&values, grid, iso)
}
