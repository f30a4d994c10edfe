use serde::{Deserialize, Serialize};

use super::metrics::{auroc, object_score, LabeledScores};
use crate::error::{PasdfError, Result};
use crate::geom::{apply_transform, PointCloud, RigidTransform};
use crate::pam::{pose_align, PamParams};
use crate::sdf::SdfField;

pub const DEFAULT_TOP_K: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    /// `|f|` per input point, in input order.
    pub per_point_scores: Vec<f64>,
    pub object_score: f64,
    pub k_used: usize,
    /// Scan frame → canonical frame.
    pub transform: RigidTransform,
    pub converged: bool,
}

impl AnomalyReport {
    /// Fills `object_score` and `k_used` from the per-point scores.
    pub fn aggregate(mut self, k: usize) -> Result<Self> {
        self.object_score = object_score(&self.per_point_scores, k)?;
        self.k_used = k.min(self.per_point_scores.len());
        Ok(self)
    }
}

/// Aligns `test` to `canonical` (identity when `pam` is `None`) and scores
/// every point by the magnitude of the learned field. PAM non-convergence is
/// reported, not raised. The object score is left at zero; see
/// [`AnomalyReport::aggregate`].
pub fn score_points(
    field: &SdfField,
    test: &PointCloud,
    canonical: &PointCloud,
    pam: Option<&PamParams>,
) -> Result<AnomalyReport> {
    test.ensure_non_empty("score_points")?;
    let (transform, converged) = match pam {
        Some(p) => {
            let a = pose_align(test, canonical, p)?;
            (a.cumulative, a.converged)
        }
        None => (RigidTransform::identity(), true),
    };
    let aligned = apply_transform(&transform, test);
    let values = field.eval(aligned.points())?;
    Ok(AnomalyReport {
        per_point_scores: values.iter().map(|v| v.abs()).collect(),
        object_score: 0.0,
        k_used: 0,
        transform,
        converged,
    })
}

/// Object- and point-level AUROC over a test set; point scores are pooled
/// across objects before ranking.
pub fn evaluate(reports: &[AnomalyReport], object_labels: &[bool], point_labels: &[Vec<bool>]) -> Result<(f64, f64)> {
    if reports.len() != object_labels.len() || reports.len() != point_labels.len() {
        return Err(PasdfError::input(format!(
            "{} reports, {} object labels, {} point-label sets",
            reports.len(),
            object_labels.len(),
            point_labels.len()
        )));
    }
    let objects = LabeledScores::new(reports.iter().map(|r| r.object_score).collect(), object_labels.to_vec())?;
    let mut points = LabeledScores::default();
    for (r, labels) in reports.iter().zip(point_labels) {
        points.extend(&r.per_point_scores, labels)?;
    }
    Ok((auroc(&objects)?, auroc(&points)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::NormalizationRecord;
    use crate::sdf::{Architecture, EncodingConfig, SdfModel};
    use nalgebra::Point3;

    fn report(scores: Vec<f64>, k: usize) -> AnomalyReport {
        AnomalyReport {
            per_point_scores: scores,
            object_score: 0.0,
            k_used: 0,
            transform: RigidTransform::identity(),
            converged: true,
        }
        .aggregate(k)
        .unwrap()
    }

    #[test]
    fn zero_network_scores_nothing() {
        let enc = EncodingConfig::default();
        let field = SdfField::new(SdfModel::zeros(Architecture::new(enc.dim(), 16)).unwrap(), enc, NormalizationRecord::default()).unwrap();
        let cloud = PointCloud::new(vec![Point3::new(0.1, 0.2, 0.3), Point3::new(0.9, 0.5, 0.4)]);
        let r = score_points(&field, &cloud, &cloud, None).unwrap().aggregate(DEFAULT_TOP_K).unwrap();
        assert_eq!(r.per_point_scores, vec![0.0, 0.0]);
        assert_eq!((r.object_score, r.k_used), (0.0, 2));
    }

    #[test]
    fn identical_reports_with_opposite_labels_tie() {
        let reports = vec![report(vec![0.2, 0.4], 1), report(vec![0.2, 0.4], 1)];
        let points = vec![vec![false, true], vec![false, true]];
        let (o, p) = evaluate(&reports, &[true, false], &points).unwrap();
        assert_eq!(o, 0.5);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn flipped_labels_complement() {
        let reports: Vec<_> = (0..6).map(|i| report(vec![i as f64 * 0.1, 0.05 * i as f64 + 0.01], 1)).collect();
        let objects = [false, true, false, true, true, false];
        let points: Vec<Vec<bool>> = (0..6).map(|i| vec![i % 2 == 0, i % 3 == 0]).collect();
        let (o, p) = evaluate(&reports, &objects, &points).unwrap();
        let flip = |v: &[bool]| v.iter().map(|x| !x).collect::<Vec<_>>();
        let (fo, fp) = evaluate(&reports, &flip(&objects), &points.iter().map(|v| flip(v)).collect::<Vec<_>>()).unwrap();
        assert!((o + fo - 1.0).abs() < 1e-12 && (p + fp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let reports = vec![report(vec![0.1], 1)];
        assert!(evaluate(&reports, &[true, false], &[vec![true]]).is_err());
        assert!(evaluate(&reports, &[true], &[vec![true, false]]).is_err());
    }
}
