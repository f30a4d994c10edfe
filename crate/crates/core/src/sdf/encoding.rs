use std::f64::consts::PI;

use nalgebra::Point3;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Sinusoidal positional encoding of 3D coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingConfig {
    pub num_frequencies: usize,
    pub include_input: bool,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            num_frequencies: 6,
            include_input: true,
        }
    }
}

impl EncodingConfig {
    /// Raw coordinates only.
    pub fn identity() -> Self {
        EncodingConfig {
            num_frequencies: 0,
            include_input: true,
        }
    }

    pub fn dim(&self) -> usize {
        3 * usize::from(self.include_input) + 6 * self.num_frequencies
    }

    /// Writes `[x; sin(2⁰πx); cos(2⁰πx); …; sin(2^(L−1)πx); cos(2^(L−1)πx)]` into `out`.
    pub fn encode_into(&self, p: &Point3<f64>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut k = 0;
        if self.include_input {
            out[..3].copy_from_slice(p.coords.as_slice());
            k = 3;
        }
        let mut freq = PI;
        for _ in 0..self.num_frequencies {
            for c in 0..3 {
                out[k + c] = (freq * p[c]).sin();
                out[k + 3 + c] = (freq * p[c]).cos();
            }
            k += 6;
            freq *= 2.0;
        }
    }

    pub fn encode(&self, p: &Point3<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.encode_into(p, &mut out);
        out
    }

    /// One encoded row per point.
    pub fn encode_batch(&self, points: &[Point3<f64>]) -> Array2<f64> {
        let mut out = Array2::zeros((points.len(), self.dim()));
        for (p, mut row) in points.iter().zip(out.rows_mut()) {
            self.encode_into(p, row.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

/// Free-function form of [`EncodingConfig::encode`].
pub fn positional_encode(p: &Point3<f64>, cfg: &EncodingConfig) -> Vec<f64> {
    cfg.encode(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_with_one_frequency() {
        let cfg = EncodingConfig { num_frequencies: 1, include_input: true };
        assert_eq!(cfg.dim(), 9);
        assert_eq!(positional_encode(&Point3::origin(), &cfg), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_along_x_hits_the_sine_peak() {
        let cfg = EncodingConfig { num_frequencies: 1, include_input: true };
        let e = positional_encode(&Point3::new(0.5, 0.0, 0.0), &cfg);
        assert!((e[3] - 1.0).abs() < 1e-15);
        assert!(e[6].abs() < 1e-15);
    }

    #[test]
    fn default_dimension_is_39() {
        let cfg = EncodingConfig::default();
        assert_eq!(cfg.dim(), 39);
        assert_eq!(positional_encode(&Point3::new(0.3, 0.7, 0.1), &cfg).len(), 39);
        assert_eq!(EncodingConfig::identity().dim(), 3);
        assert_eq!(EncodingConfig { num_frequencies: 2, include_input: false }.dim(), 12);
    }

    #[test]
    fn higher_frequencies_double() {
        let cfg = EncodingConfig { num_frequencies: 3, include_input: false };
        let x = 0.137;
        let e = positional_encode(&Point3::new(x, 0.0, 0.0), &cfg);
        for l in 0..3 {
            let f = 2f64.powi(l) * PI;
            assert!((e[6 * l as usize] - (f * x).sin()).abs() < 1e-12);
            assert!((e[6 * l as usize + 3] - (f * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_rows_match_single_encoding() {
        let cfg = EncodingConfig::default();
        let pts = [Point3::new(0.1, 0.2, 0.3), Point3::new(0.9, 0.5, 0.05)];
        let batch = cfg.encode_batch(&pts);
        for (p, row) in pts.iter().zip(batch.rows()) {
            assert_eq!(row.to_vec(), cfg.encode(p));
        }
    }
}
