use crate::error::{PasdfError, Result};

/// Mean of the `k` largest scores (`k` clamped to the number of scores).
pub fn object_score(scores: &[f64], k: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(PasdfError::input("object score needs at least one point score"));
    }
    if k == 0 {
        return Err(PasdfError::param("top-K needs k >= 1"));
    }
    let k = k.min(scores.len());
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Scores with binary labels (true = anomalous).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(PasdfError::input(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn extend(&mut self, scores: &[f64], labels: &[bool]) -> Result<()> {
        if scores.len() != labels.len() {
            return Err(PasdfError::input(format!(
                "{} scores for {} labels",
                scores.len(),
                labels.len()
            )));
        }
        self.scores.extend_from_slice(scores);
        self.labels.extend_from_slice(labels);
        Ok(())
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// P(anomalous > normal) + ½·P(tie), from midranks.
pub fn auroc(data: &LabeledScores) -> Result<f64> {
    if data.scores.len() != data.labels.len() {
        return Err(PasdfError::input("scores and labels differ in length"));
    }
    if data.scores.iter().any(|s| s.is_nan()) {
        return Err(PasdfError::input("AUROC scores must not be NaN"));
    }
    let n_pos = data.labels.iter().filter(|&&l| l).count();
    let n_neg = data.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(PasdfError::UndefinedMetric(format!(
            "AUROC needs both classes ({n_pos} anomalous, {n_neg} normal)"
        )));
    }
    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_unstable_by(|&a, &b| data.scores[a].total_cmp(&data.scores[b]));
    // Twice the positive rank sum keeps midranks integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && data.scores[order[j + 1]] == data.scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share the midrank (i + j + 2) / 2.
        let positives = order[i..=j].iter().filter(|&&o| data.labels[o]).count() as u128;
        rank_sum2 += positives * (i + j + 2) as u128;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}
