use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PasdfError, Result};
use crate::sampling::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Box { extents: [f64; 3] },
    /// Ring around the z axis.
    Torus { major: f64, minor: f64 },
    /// Cylinder of `length` along z capped by hemispheres.
    Capsule { radius: f64, length: f64 },
}

/// A parametric shape centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    /// Tessellation level; higher is finer.
    pub density: usize,
}

impl ShapeSpec {
    pub fn sphere(radius: f64) -> Self {
        ShapeSpec { kind: ShapeKind::Sphere { radius }, density: 3 }
    }

    pub fn cuboid(extents: [f64; 3]) -> Self {
        ShapeSpec { kind: ShapeKind::Box { extents }, density: 3 }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        ShapeSpec { kind: ShapeKind::Torus { major, minor }, density: 3 }
    }

    pub fn capsule(radius: f64, length: f64) -> Self {
        ShapeSpec { kind: ShapeKind::Capsule { radius, length }, density: 3 }
    }

    pub fn with_density(mut self, density: usize) -> Self {
        self.density = density;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::Box { .. } => "box",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::Capsule { .. } => "capsule",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ShapeKind::Sphere { radius } => radius > 0.0,
            ShapeKind::Box { extents } => extents.iter().all(|&e| e > 0.0),
            ShapeKind::Torus { major, minor } => minor > 0.0 && major > minor,
            ShapeKind::Capsule { radius, length } => radius > 0.0 && length >= 0.0,
        };
        if !ok {
            return Err(PasdfError::param(format!("invalid {} parameters: {:?}", self.name(), self.kind)));
        }
        if self.density == 0 {
            return Err(PasdfError::param("shape density must be at least 1"));
        }
        Ok(())
    }

    /// Exact signed distance to the ideal (untessellated) surface, negative inside.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        match self.kind {
            ShapeKind::Sphere { radius } => p.coords.norm() - radius,
            ShapeKind::Box { extents } => {
                let q = p.coords.abs() - Vector3::from(extents) * 0.5;
                q.sup(&Vector3::zeros()).norm() + q.max().min(0.0)
            }
            ShapeKind::Torus { major, minor } => {
                let ring = p.x.hypot(p.y) - major;
                ring.hypot(p.z) - minor
            }
            ShapeKind::Capsule { radius, length } => {
                let z = p.z.clamp(-0.5 * length, 0.5 * length);
                (p.coords - Vector3::new(0.0, 0.0, z)).norm() - radius
            }
        }
    }

    /// Half-diagonal of the shape's bounding box.
    pub fn bounding_radius(&self) -> f64 {
        let half = match self.kind {
            ShapeKind::Sphere { radius } => Vector3::repeat(radius),
            ShapeKind::Box { extents } => Vector3::from(extents) * 0.5,
            ShapeKind::Torus { major, minor } => Vector3::new(major + minor, major + minor, minor),
            ShapeKind::Capsule { radius, length } => Vector3::new(radius, radius, radius + 0.5 * length),
        };
        half.norm()
    }
}

/// Watertight, outward-wound triangulation of `spec`. The seed is accepted for
/// interface symmetry with the other generators; tessellation is deterministic.
pub fn generate_shape(spec: &ShapeSpec, _seed: u64) -> Result<TriMesh> {
    spec.validate()?;
    let d = spec.density;
    match spec.kind {
        ShapeKind::Sphere { radius } => {
            let n_lat = 8 * d;
            let profile = (0..=n_lat)
                .map(|i| {
                    let theta = PI * i as f64 / n_lat as f64;
                    (radius * theta.sin(), radius * theta.cos())
                })
                .collect::<Vec<_>>();
            revolve(&profile, 16 * d)
        }
        ShapeKind::Capsule { radius, length } => {
            let n_cap = 4 * d;
            let h = 0.5 * length;
            let mut profile: Vec<(f64, f64)> = (0..=n_cap)
                .map(|i| {
                    let theta = 0.5 * PI * i as f64 / n_cap as f64;
                    (radius * theta.sin(), h + radius * theta.cos())
                })
                .collect();
            if length > 0.0 {
                let n_body = (2 * d).max((length / radius * d as f64).ceil() as usize);
                profile.extend((1..n_body).map(|i| (radius, h - length * i as f64 / n_body as f64)));
                profile.extend((0..=n_cap).map(|i| {
                    let theta = 0.5 * PI * (1.0 + i as f64 / n_cap as f64);
                    (radius * theta.sin(), -h + radius * theta.cos())
                }));
            } else {
                profile.extend((1..=n_cap).map(|i| {
                    let theta = 0.5 * PI * (1.0 + i as f64 / n_cap as f64);
                    (radius * theta.sin(), radius * theta.cos())
                }));
            }
            revolve(&profile, 16 * d)
        }
        ShapeKind::Torus { major, minor } => torus(major, minor, 24 * d, 12 * d),
        ShapeKind::Box { extents } => cuboid(extents, 4 * d),
    }
}

/// Revolves a profile `(rho, z)` that runs from the top pole (rho = 0) to the
/// bottom pole around the z axis.
fn revolve(profile: &[(f64, f64)], n_lon: usize) -> Result<TriMesh> {
    let rings = &profile[1..profile.len() - 1];
    let top = 0;
    let bottom = 1 + rings.len() * n_lon;
    let ring_vertex = |ring: usize, j: usize| 1 + ring * n_lon + j % n_lon;

    let mut vertices = vec![Point3::new(0.0, 0.0, profile[0].1)];
    for &(rho, z) in rings {
        for j in 0..n_lon {
            let phi = 2.0 * PI * j as f64 / n_lon as f64;
            vertices.push(Point3::new(rho * phi.cos(), rho * phi.sin(), z));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, profile[profile.len() - 1].1));

    let mut faces = Vec::with_capacity(2 * n_lon * rings.len());
    for j in 0..n_lon {
        faces.push([top, ring_vertex(0, j), ring_vertex(0, j + 1)]);
    }
    for r in 0..rings.len() - 1 {
        for j in 0..n_lon {
            let (u0, u1) = (ring_vertex(r, j), ring_vertex(r, j + 1));
            let (l0, l1) = (ring_vertex(r + 1, j), ring_vertex(r + 1, j + 1));
            faces.push([u0, l0, l1]);
            faces.push([u0, l1, u1]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..n_lon {
        faces.push([bottom, ring_vertex(last, j + 1), ring_vertex(last, j)]);
    }
    TriMesh::new(vertices, faces)
}

fn torus(major: f64, minor: f64, n_u: usize, n_v: usize) -> Result<TriMesh> {
    let index = |i: usize, j: usize| (i % n_u) * n_v + j % n_v;
    let mut vertices = Vec::with_capacity(n_u * n_v);
    for i in 0..n_u {
        let u = 2.0 * PI * i as f64 / n_u as f64;
        for j in 0..n_v {
            let v = 2.0 * PI * j as f64 / n_v as f64;
            let rho = major + minor * v.cos();
            vertices.push(Point3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let mut faces = Vec::with_capacity(2 * n_u * n_v);
    for i in 0..n_u {
        for j in 0..n_v {
            let (a, b, c, d) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, faces)
}

/// Box with each face split into an `n × n` grid; grid vertices on shared edges are welded.
fn cuboid(extents: [f64; 3], n: usize) -> Result<TriMesh> {
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |key: [usize; 3]| -> usize {
        *lookup.entry(key).or_insert_with(|| {
            let c = |axis: usize| extents[axis] * (key[axis] as f64 / n as f64 - 0.5);
            vertices.push(Point3::new(c(0), c(1), c(2)));
            vertices.len() - 1
        })
    };
    let mut faces = Vec::with_capacity(12 * n * n);
    for axis in 0..3 {
        for side in [0, n] {
            // (a1, a2) ordered so that a1 × a2 points away from the box.
            let (mut a1, mut a2) = ((axis + 1) % 3, (axis + 2) % 3);
            if side == 0 {
                std::mem::swap(&mut a1, &mut a2);
            }
            let key = |i: usize, j: usize| {
                let mut k = [0; 3];
                k[axis] = side;
                k[a1] = i;
                k[a2] = j;
                k
            };
            for i in 0..n {
                for j in 0..n {
                    let a = vertex(key(i, j));
                    let b = vertex(key(i + 1, j));
                    let c = vertex(key(i + 1, j + 1));
                    let d = vertex(key(i, j + 1));
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
    }
    TriMesh::new(vertices, faces)
}
