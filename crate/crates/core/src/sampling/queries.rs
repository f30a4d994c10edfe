use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::surface::sample_surface_rng;
use super::TriMesh;
use crate::error::{PasdfError, Result};
use crate::geom::{Aabb, PointCloud, SpatialIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryTier {
    /// Uniform in the unit cube.
    Volume,
    /// Uniform in the expanded object bounding box.
    Bbox,
    /// On the surface.
    Surface,
}

impl QueryTier {
    pub const ALL: [QueryTier; 3] = [QueryTier::Volume, QueryTier::Bbox, QueryTier::Surface];

    pub fn code(self) -> u8 {
        match self {
            QueryTier::Volume => 0,
            QueryTier::Bbox => 1,
            QueryTier::Surface => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        QueryTier::ALL.into_iter().find(|t| t.code() == code)
    }
}

/// A training query in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySample {
    pub position: Point3<f64>,
    pub sdf: f64,
    pub tier: QueryTier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryConfig {
    pub n_volume: usize,
    pub n_bbox: usize,
    pub n_surface: usize,
    pub bbox_expand: f64,
    /// Surface points used as the labeling reference on the mesh path.
    pub n_label: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            n_volume: 3_000,
            n_bbox: 10_000,
            n_surface: 10_000,
            bbox_expand: 1.3,
            n_label: 50_000,
        }
    }
}

impl QueryConfig {
    pub fn total(&self) -> usize {
        self.n_volume + self.n_bbox + self.n_surface
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(PasdfError::param("at least one query sample is required"));
        }
        if !(self.bbox_expand > 0.0) || !self.bbox_expand.is_finite() {
            return Err(PasdfError::param("bbox_expand must be positive"));
        }
        if self.n_label == 0 {
            return Err(PasdfError::param("n_label must be at least 1"));
        }
        Ok(())
    }
}

/// Where surface-tier queries come from.
#[derive(Debug, Clone, Copy)]
pub enum SurfaceSource<'a> {
    Mesh(&'a TriMesh),
    /// Points are drawn from the cloud itself (uniformly, with replacement).
    Cloud(&'a PointCloud),
}

impl SurfaceSource<'_> {
    fn bounds(&self) -> Option<Aabb> {
        match self {
            SurfaceSource::Mesh(m) => m.bounds(),
            SurfaceSource::Cloud(c) => c.bounds(),
        }
    }
}

fn tier_rng(seed: u64, tier: QueryTier) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(tier.code()) + 1);
    rng
}

fn uniform_in(rng: &mut ChaCha8Rng, bounds: &Aabb) -> Point3<f64> {
    let e = bounds.extents();
    Point3::new(
        bounds.min.x + rng.random::<f64>() * e.x,
        bounds.min.y + rng.random::<f64>() * e.y,
        bounds.min.z + rng.random::<f64>() * e.z,
    )
}

/// Three-tier query positions (sdf left at 0): volume, then bbox, then surface.
/// Each tier draws from its own random stream.
pub fn sample_queries(source: SurfaceSource<'_>, config: &QueryConfig, seed: u64) -> Result<Vec<QuerySample>> {
    config.validate()?;
    let unit = Aabb {
        min: Point3::origin(),
        max: Point3::new(1.0, 1.0, 1.0),
    };
    let bounds = source
        .bounds()
        .ok_or_else(|| PasdfError::input("cannot sample queries around empty geometry"))?;
    let mut out = Vec::with_capacity(config.total());
    let query = |position, tier| QuerySample { position, sdf: 0.0, tier };

    let mut rng = tier_rng(seed, QueryTier::Volume);
    out.extend((0..config.n_volume).map(|_| query(uniform_in(&mut rng, &unit), QueryTier::Volume)));

    if config.n_bbox > 0 {
        let expanded = bounds.scaled(config.bbox_expand).intersect(&unit).unwrap_or(bounds);
        let mut rng = tier_rng(seed, QueryTier::Bbox);
        out.extend((0..config.n_bbox).map(|_| query(uniform_in(&mut rng, &expanded), QueryTier::Bbox)));
    }

    if config.n_surface > 0 {
        let mut rng = tier_rng(seed, QueryTier::Surface);
        match source {
            SurfaceSource::Mesh(mesh) => {
                let samples = sample_surface_rng(mesh, config.n_surface, &mut rng)?;
                out.extend(samples.cloud.points().iter().map(|&p| query(p, QueryTier::Surface)));
            }
            SurfaceSource::Cloud(cloud) => {
                let n = cloud.len();
                out.extend(
                    (0..config.n_surface).map(|_| query(cloud.points()[rng.random_range(0..n)], QueryTier::Surface)),
                );
            }
        }
    }
    Ok(out)
}

/// `‖x − p‖ · sgn(n · (x − p))` against the nearest oriented surface point, with sgn(0) = +1.
pub fn signed_distances(positions: &[Point3<f64>], surface: &PointCloud) -> Result<Vec<f64>> {
    let normals = surface
        .normals()
        .ok_or_else(|| PasdfError::input("signed-distance labeling needs surface normals"))?;
    surface.ensure_non_empty("labeling surface")?;
    let index = SpatialIndex::new(surface.points());
    Ok(positions
        .par_iter()
        .map(|x| {
            let nb = index.nearest(x).expect("non-empty index");
            let offset = x - surface.points()[nb.index];
            let dist = nb.dist2.sqrt();
            if normals[nb.index].dot(&offset) < 0.0 {
                -dist
            } else {
                dist
            }
        })
        .collect())
}

/// Fills in `sdf` for every query. Surface-tier queries lie on the surface by
/// construction and are labeled exactly zero.
pub fn label_sdf(queries: &[QuerySample], surface: &PointCloud) -> Result<Vec<QuerySample>> {
    let positions: Vec<_> = queries.iter().map(|q| q.position).collect();
    let sdf = signed_distances(&positions, surface)?;
    Ok(queries
        .iter()
        .zip(sdf)
        .map(|(q, s)| QuerySample {
            sdf: if q.tier == QueryTier::Surface { 0.0 } else { s },
            ..*q
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_surface;
    use crate::synth::{generate_shape, ShapeSpec};

    fn unit_sphere_surface(n: usize) -> PointCloud {
        let mesh = generate_shape(&ShapeSpec::sphere(1.0).with_density(6), 0).unwrap();
        sample_surface(&mesh, n, 3).unwrap()
    }

    fn small_cube() -> TriMesh {
        let mesh = generate_shape(&ShapeSpec::cuboid([0.2, 0.2, 0.2]).with_density(1), 0).unwrap();
        mesh.map_vertices(|p| p + nalgebra::Vector3::repeat(0.5))
    }

    #[test]
    fn default_counts_per_tier() {
        let mesh = small_cube();
        let q = sample_queries(SurfaceSource::Mesh(&mesh), &QueryConfig::default(), 0).unwrap();
        assert_eq!(q.len(), 23_000);
        let count = |t| q.iter().filter(|s| s.tier == t).count();
        assert_eq!(count(QueryTier::Surface), 10_000);
        assert_eq!(count(QueryTier::Bbox), 10_000);
        assert_eq!(count(QueryTier::Volume), 3_000);
    }

    #[test]
    fn bbox_tier_stays_in_unexpanded_box() {
        let mesh = small_cube();
        let config = QueryConfig { bbox_expand: 1.0, ..QueryConfig::default() };
        let q = sample_queries(SurfaceSource::Mesh(&mesh), &config, 1).unwrap();
        for s in q.iter().filter(|s| s.tier == QueryTier::Bbox) {
            assert!(s.position.iter().all(|&c| (0.4 - 1e-12..=0.6 + 1e-12).contains(&c)));
        }
    }

    #[test]
    fn volume_tier_stays_in_unit_cube() {
        let mesh = small_cube();
        let q = sample_queries(SurfaceSource::Mesh(&mesh), &QueryConfig::default(), 2).unwrap();
        for s in q.iter().filter(|s| s.tier == QueryTier::Volume) {
            assert!(s.position.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }

    #[test]
    fn expanded_box_is_clamped_to_unit_cube() {
        let mesh = generate_shape(&ShapeSpec::cuboid([1.0, 1.0, 1.0]).with_density(1), 0)
            .unwrap()
            .map_vertices(|p| p + nalgebra::Vector3::repeat(0.5));
        let config = QueryConfig { n_volume: 0, n_surface: 0, ..QueryConfig::default() };
        let q = sample_queries(SurfaceSource::Mesh(&mesh), &config, 2).unwrap();
        assert!(q.iter().all(|s| s.position.iter().all(|&c| (0.0..=1.0).contains(&c))));
    }

    #[test]
    fn tiers_are_independent_streams() {
        let mesh = small_cube();
        let full = sample_queries(SurfaceSource::Mesh(&mesh), &QueryConfig::default(), 7).unwrap();
        let no_volume = QueryConfig { n_volume: 0, ..QueryConfig::default() };
        let partial = sample_queries(SurfaceSource::Mesh(&mesh), &no_volume, 7).unwrap();
        assert_eq!(&full[3_000..], &partial[..]);
    }

    #[test]
    fn sample_on_surface_point_has_zero_sdf() {
        let surface = unit_sphere_surface(2_000);
        let d = signed_distances(&surface.points()[..10], &surface).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sphere_center_and_outside_point() {
        let surface = unit_sphere_surface(10_000);
        let d = signed_distances(&[Point3::origin(), Point3::new(2.0, 0.0, 0.0)], &surface).unwrap();
        assert!((d[0] + 1.0).abs() <= 0.01, "{}", d[0]);
        assert!((d[1] - 1.0).abs() <= 0.01, "{}", d[1]);
    }

    #[test]
    fn sign_matches_analytic_inside_outside() {
        let spec = ShapeSpec::cuboid([0.5, 0.3, 0.4]);
        let mesh = generate_shape(&spec, 0).unwrap();
        let surface = sample_surface(&mesh, 10_000, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3<f64>> = (0..5_000)
            .map(|_| Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .filter(|p| spec.signed_distance(p).abs() > 1e-3)
            .collect();
        let d = signed_distances(&pts, &surface).unwrap();
        let agree = pts.iter().zip(&d).filter(|(p, s)| (spec.signed_distance(p) < 0.0) == (**s < 0.0)).count();
        assert!(agree as f64 / pts.len() as f64 >= 0.999, "{agree}/{}", pts.len());
    }

    #[test]
    fn labels_are_bounded_by_cube_diagonal() {
        let mesh = small_cube();
        let surface = sample_surface(&mesh, 5_000, 1).unwrap();
        let q = sample_queries(SurfaceSource::Mesh(&mesh), &QueryConfig::default(), 3).unwrap();
        let labeled = label_sdf(&q, &surface).unwrap();
        assert!(labeled.iter().all(|s| s.sdf.abs() <= 3f64.sqrt()));
        assert!(labeled.iter().filter(|s| s.tier == QueryTier::Surface).all(|s| s.sdf == 0.0));
    }

    #[test]
    fn denser_reference_does_not_hurt_accuracy() {
        let spec = ShapeSpec::sphere(1.0);
        let mesh = generate_shape(&spec.with_density(8), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Point3<f64>> = (0..2_000)
            .map(|_| Point3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
            .collect();
        let error = |n| {
            let d = signed_distances(&pts, &sample_surface(&mesh, n, 1).unwrap()).unwrap();
            pts.iter().zip(d).map(|(p, s)| (s - spec.signed_distance(p)).abs()).sum::<f64>() / pts.len() as f64
        };
        assert!(error(10_000) <= error(5_000));
    }

    #[test]
    fn missing_normals_is_an_error() {
        let cloud = PointCloud::new(vec![Point3::origin()]);
        assert!(signed_distances(&[Point3::origin()], &cloud).is_err());
    }

    #[test]
    fn tier_codes_round_trip() {
        for t in QueryTier::ALL {
            assert_eq!(QueryTier::from_code(t.code()), Some(t));
        }
        assert_eq!(QueryTier::from_code(9), None);
    }
}
