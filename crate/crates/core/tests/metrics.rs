mod support;

use pasdf::anomaly::{auroc, LabeledScores};
use pasdf::geom::{chamfer_loss, chamfer_metric};
use pasdf::repair::emd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn auroc_matches_pairwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (scores, labels) = random_labeled_set(&mut rng);
        let oracle = pairwise_auroc(&scores, &labels);
        let ours = auroc(&LabeledScores::new(scores, labels).unwrap()).unwrap();
        assert!((ours - oracle).abs() <= 1e-12, "{ours} vs {oracle}");
    }
}

#[test]
fn chamfer_variants_match_double_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let na = rng.random_range(1..400);
        let nb = rng.random_range(1..400);
        let (a, b) = (random_cloud(&mut rng, na), random_cloud(&mut rng, nb));
        let m = brute_chamfer_metric(&a, &b);
        let l = brute_chamfer_loss(&a, &b);
        assert!((chamfer_metric(&a, &b).unwrap() - m).abs() <= 1e-12 * m);
        assert!((chamfer_loss(&a, &b).unwrap() - l).abs() <= 1e-12 * l);
    }
}

#[test]
fn emd_equals_best_permutation_at_six_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let (a, b) = (random_cloud(&mut rng, 6), random_cloud(&mut rng, 6));
        assert_eq!(emd(&a, &b).unwrap(), emd_by_permutations(&a, &b));
    }
}

#[test]
fn emd_matches_min_cost_flow_at_thirty_two_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let (a, b) = (random_cloud(&mut rng, 32), random_cloud(&mut rng, 32));
        let oracle = emd_by_min_cost_flow(&a, &b);
        assert!((emd(&a, &b).unwrap() - oracle).abs() <= 1e-9, "{oracle}");
    }
}
