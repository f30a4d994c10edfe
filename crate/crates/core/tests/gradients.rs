mod support;

use nalgebra::Point3;
use ndarray::Array2;
use pasdf::sdf::{EncodingConfig, LossConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{gradient_check, gradient_probe, probe_architecture, random_model, RefNet};

#[test]
fn model_forward_matches_reference_network() {
    let encoding = EncodingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = random_model(probe_architecture(8, 32, &encoding), &mut rng);
    let net = RefNet::from_model(&model);
    let points: Vec<Point3<f64>> = (0..100).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect();
    let ours = model.predict(&points, &encoding).unwrap();
    for (p, v) in points.iter().zip(ours) {
        let r = net.forward(&encoding.encode(p));
        assert!((v - r).abs() <= 1e-12 * r.abs().max(1.0), "{v} vs {r}");
    }
}

#[test]
fn shallow_probe_gradients_match_finite_differences() {
    let encoding = EncodingConfig::identity();
    let c = gradient_probe(probe_architecture(2, 8, &encoding), &encoding, 20, 4, 11);
    assert!(c.checked > 0);
    assert_eq!(c.failures, 0, "{c:?}");
}

#[test]
fn deep_probe_gradients_match_finite_differences() {
    let encoding = EncodingConfig::default();
    let c = gradient_probe(probe_architecture(8, 64, &encoding), &encoding, 2, 2, 12);
    assert_eq!(c.failures, 0, "{c:?}");
}

#[test]
fn saturated_predictions_have_zero_gradient() {
    let encoding = EncodingConfig::identity();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = random_model(probe_architecture(3, 8, &encoding), &mut rng);
    let loss = LossConfig { d_max: 1e-9, clamp_target: false };
    let inputs: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
    let x = Array2::from_shape_fn((4, 3), |(r, c)| inputs[r][c]);
    let (_, g) = model.loss_and_gradients(x.view(), &[0.5; 4], &loss, None).unwrap();
    assert_eq!(g.norm(), 0.0);
    assert_eq!(gradient_check(&model, &inputs, &[0.5; 4], &loss, 1e-6).failures, 0);
}
