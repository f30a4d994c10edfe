//! Weight-normalized MLP with a skip connection and inverted dropout, plus
//! exact reverse-mode gradients of the clamped L1 loss.

use nalgebra::Point3;
use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoding::EncodingConfig;
use super::loss::LossConfig;
use crate::error::{PasdfError, Result};

/// Rows per work unit. Fixed so that results do not depend on the thread count.
pub const CHUNK_ROWS: usize = 256;

/// Row norms below this are treated as degenerate.
pub const MIN_ROW_NORM: f64 = 1e-12;

/// Initial output-layer gain relative to its row norm. Predictions outside the
/// clamp band get no gradient, so the network starts close to zero.
pub const OUTPUT_GAIN_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_width: usize,
    /// Affine layers including the scalar output layer.
    pub num_layers: usize,
    /// 0-based layer whose input has the encoded input appended.
    pub skip_layer: Option<usize>,
    pub dropout: f64,
}

impl Architecture {
    /// Eight layers, skip into the fourth, dropout 0.2.
    pub fn new(input_dim: usize, hidden_width: usize) -> Self {
        Architecture {
            input_dim,
            hidden_width,
            num_layers: 8,
            skip_layer: Some(3),
            dropout: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_width == 0 || self.num_layers == 0 {
            return Err(PasdfError::param("architecture dimensions must be positive"));
        }
        if let Some(k) = self.skip_layer {
            if k == 0 || k >= self.num_layers {
                return Err(PasdfError::param(format!(
                    "skip layer {k} must lie in 1..{}",
                    self.num_layers
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(PasdfError::param("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    /// `(out, in)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let mut fan_in = if l == 0 { self.input_dim } else { self.hidden_width };
        if self.skip_layer == Some(l) {
            fan_in += self.input_dim;
        }
        let out = if l + 1 == self.num_layers { 1 } else { self.hidden_width };
        (out, fan_in)
    }

    pub fn parameter_count(&self) -> usize {
        (0..self.num_layers)
            .map(|l| {
                let (o, i) = self.layer_shape(l);
                o * i + 2 * o
            })
            .sum()
    }
}

/// One affine layer: effective weight row `i` is `gain[i] · direction[i] / ‖direction[i]‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub direction: Array2<f64>,
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn row_norms(&self) -> Array1<f64> {
        self.direction.map_axis(Axis(1), |r| r.dot(&r).sqrt())
    }

    pub fn effective_weight(&self) -> Array2<f64> {
        let scale = &self.gain / &self.row_norms();
        &self.direction * &scale.insert_axis(Axis(1))
    }
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.direction.iter().chain(&l.gain).chain(&l.bias).map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.direction.iter().chain(&l.gain).chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfModel {
    arch: Architecture,
    layers: Vec<Layer>,
}

struct Cache {
    /// Input to every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    /// Dropout scale per hidden unit (0 or 1/(1−p)); empty in eval mode.
    masks: Vec<Array2<f64>>,
}

/// Sum of per-sample losses and of effective-weight / bias gradients over a chunk.
struct ChunkGrad {
    loss: f64,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(CHUNK_ROWS).map(|s| (s, (s + CHUNK_ROWS).min(n))).collect()
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

impl SdfModel {
    /// Gaussian directions scaled by 1/√fan_in, gains equal to the initial row
    /// norms (output layer: scaled by [`OUTPUT_GAIN_SCALE`]), zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..arch.num_layers)
            .map(|l| {
                let (out, fan_in) = arch.layer_shape(l);
                let std = 1.0 / (fan_in as f64).sqrt();
                let direction = Array2::from_shape_simple_fn((out, fan_in), || {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * std
                });
                let mut layer = Layer {
                    direction,
                    gain: Array1::zeros(out),
                    bias: Array1::zeros(out),
                };
                layer.gain = layer.row_norms();
                if l + 1 == arch.num_layers {
                    layer.gain *= OUTPUT_GAIN_SCALE;
                }
                layer
            })
            .collect();
        Ok(SdfModel { arch, layers })
    }

    /// Every effective weight and bias zero (unit directions, zero gains).
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = (0..arch.num_layers)
            .map(|l| {
                let (out, fan_in) = arch.layer_shape(l);
                Layer {
                    direction: Array2::from_elem((out, fan_in), 1.0),
                    gain: Array1::zeros(out),
                    bias: Array1::zeros(out),
                }
            })
            .collect();
        Ok(SdfModel { arch, layers })
    }

    /// Builds a model from explicit parameters, checking shapes and row norms.
    pub fn from_layers(arch: Architecture, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let model = SdfModel { arch, layers };
        model.check_layers()?;
        Ok(model)
    }

    pub(crate) fn check_layers(&self) -> Result<()> {
        if self.layers.len() != self.arch.num_layers {
            return Err(PasdfError::ArtifactMismatch(format!(
                "{} layers for a {}-layer architecture",
                self.layers.len(),
                self.arch.num_layers
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (out, fan_in) = self.arch.layer_shape(l);
            if layer.direction.dim() != (out, fan_in) || layer.gain.len() != out || layer.bias.len() != out {
                return Err(PasdfError::ArtifactMismatch(format!("layer {l} does not match shape {out}x{fan_in}")));
            }
            if layer.row_norms().iter().any(|&n| !(n > MIN_ROW_NORM)) {
                return Err(PasdfError::input(format!("layer {l} has a degenerate direction row")));
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn parameter_norm(&self) -> f64 {
        Gradients { layers: self.layers.clone() }.norm()
    }

    pub fn is_finite(&self) -> bool {
        Gradients { layers: self.layers.clone() }.is_finite()
    }

    fn effective_weights(&self) -> Vec<Array2<f64>> {
        self.layers.iter().map(Layer::effective_weight).collect()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.arch.input_dim {
            return Err(PasdfError::input(format!(
                "encoded input has {cols} values, model expects {}",
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    fn forward_chunk(
        &self,
        weights: &[Array2<f64>],
        x: ArrayView2<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
        keep: bool,
    ) -> (Array1<f64>, Option<Cache>) {
        let last = self.arch.num_layers - 1;
        let keep_p = 1.0 - self.arch.dropout;
        let mut cache = Cache {
            inputs: Vec::new(),
            pre: Vec::new(),
            masks: Vec::new(),
        };
        let mut h = x.to_owned();
        for (l, (w, layer)) in weights.iter().zip(&self.layers).enumerate() {
            if self.arch.skip_layer == Some(l) {
                h = concatenate![Axis(1), h, x];
            }
            let mut z = h.dot(&w.t());
            z += &layer.bias;
            if l == last {
                if keep {
                    cache.inputs.push(h);
                }
                return (z.column(0).to_owned(), keep.then_some(cache));
            }
            let mut a = z.mapv(|v| v.max(0.0));
            if let Some(r) = rng.as_deref_mut() {
                let mask = Array2::from_shape_simple_fn(a.dim(), || {
                    if r.random::<f64>() < keep_p {
                        1.0 / keep_p
                    } else {
                        0.0
                    }
                });
                a *= &mask;
                if keep {
                    cache.masks.push(mask);
                }
            }
            if keep {
                cache.inputs.push(h);
                cache.pre.push(z);
            }
            h = a;
        }
        unreachable!("the output layer returns")
    }

    /// Scalar prediction for one encoded input. Passing an RNG runs in
    /// training mode (dropout active).
    pub fn forward(&self, encoded: &[f64], rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
        self.check_input(encoded.len())?;
        let x = ArrayView2::from_shape((1, encoded.len()), encoded).expect("contiguous slice");
        Ok(self.forward_chunk(&self.effective_weights(), x, rng, false).0[0])
    }

    /// Eval-mode predictions, one per row.
    pub fn predict_encoded(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_input(x.ncols())?;
        let weights = self.effective_weights();
        let parts: Vec<Array1<f64>> = chunk_ranges(x.nrows())
            .into_par_iter()
            .map(|(a, b)| self.forward_chunk(&weights, x.slice(s![a..b, ..]), None, false).0)
            .collect();
        Ok(parts.into_iter().flatten().collect())
    }

    /// Eval-mode predictions at raw points.
    pub fn predict(&self, points: &[Point3<f64>], encoding: &EncodingConfig) -> Result<Vec<f64>> {
        self.check_input(encoding.dim())?;
        let weights = self.effective_weights();
        let parts: Vec<Array1<f64>> = chunk_ranges(points.len())
            .into_par_iter()
            .map(|(a, b)| {
                let x = encoding.encode_batch(&points[a..b]);
                self.forward_chunk(&weights, x.view(), None, false).0
            })
            .collect();
        Ok(parts.into_iter().flatten().collect())
    }

    fn backward_chunk(
        &self,
        weights: &[Array2<f64>],
        x: ArrayView2<f64>,
        targets: &[f64],
        loss: &LossConfig,
        rng: Option<&mut ChaCha8Rng>,
    ) -> ChunkGrad {
        let (pred, cache) = self.forward_chunk(weights, x, rng, true);
        let cache = cache.expect("cache requested");
        let mut total = 0.0;
        let mut dz = Array2::zeros((pred.len(), 1));
        for (i, (&p, &t)) in pred.iter().zip(targets).enumerate() {
            let (value, grad) = loss.eval(p, t);
            total += value;
            dz[[i, 0]] = grad;
        }
        let n = self.arch.num_layers;
        let mut dw = vec![Array2::zeros((0, 0)); n];
        let mut db = vec![Array1::zeros(0); n];
        for l in (0..n).rev() {
            dw[l] = dz.t().dot(&cache.inputs[l]);
            db[l] = dz.sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let mut dh = dz.dot(&weights[l]);
            if self.arch.skip_layer == Some(l) {
                dh = dh.slice(s![.., ..self.arch.hidden_width]).to_owned();
            }
            // Back through dropout and ReLU of layer l − 1 (ReLU'(0) = 0).
            if let Some(mask) = cache.masks.get(l - 1) {
                dh *= mask;
            }
            ndarray::Zip::from(&mut dh)
                .and(&cache.pre[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            dz = dh;
        }
        ChunkGrad {
            loss: total,
            weights: dw,
            biases: db,
        }
    }

    /// Mean clamped-L1 loss over the batch and its exact gradient with respect
    /// to every gain, direction and bias. `dropout_seed` enables training mode.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: &[f64],
        loss: &LossConfig,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(x.ncols())?;
        if x.nrows() == 0 || x.nrows() != targets.len() {
            return Err(PasdfError::input(format!(
                "batch of {} inputs and {} targets",
                x.nrows(),
                targets.len()
            )));
        }
        let weights = self.effective_weights();
        let ranges = chunk_ranges(x.nrows());
        let parts: Vec<ChunkGrad> = ranges
            .par_iter()
            .enumerate()
            .map(|(c, &(a, b))| {
                let mut rng = dropout_seed.map(|s| chunk_rng(s, c));
                self.backward_chunk(&weights, x.slice(s![a..b, ..]), &targets[a..b], loss, rng.as_mut())
            })
            .collect();
        let mut parts = parts.into_iter();
        let mut acc = parts.next().expect("non-empty batch");
        for p in parts {
            acc.loss += p.loss;
            for (w, pw) in acc.weights.iter_mut().zip(&p.weights) {
                *w += pw;
            }
            for (b, pb) in acc.biases.iter_mut().zip(&p.biases) {
                *b += pb;
            }
        }
        let inv = 1.0 / x.nrows() as f64;

        // Chain rule through w = g · v / ‖v‖, row by row.
        let layers = self
            .layers
            .iter()
            .zip(acc.weights)
            .zip(acc.biases)
            .map(|((layer, dw), db)| {
                let dw = dw * inv;
                let norms = layer.row_norms();
                let mut direction = Array2::zeros(layer.direction.dim());
                let mut gain = Array1::zeros(layer.gain.len());
                for i in 0..layer.gain.len() {
                    let u = &layer.direction.row(i) / norms[i];
                    let dg = u.dot(&dw.row(i));
                    gain[i] = dg;
                    let dv = (&dw.row(i) - &(&u * dg)) * (layer.gain[i] / norms[i]);
                    direction.row_mut(i).assign(&dv);
                }
                Layer {
                    direction,
                    gain,
                    bias: db * inv,
                }
            })
            .collect();
        Ok((acc.loss * inv, Gradients { layers }))
    }

    /// Eval-mode mean loss.
    pub fn loss(&self, x: ArrayView2<f64>, targets: &[f64], loss: &LossConfig) -> Result<f64> {
        let pred = self.predict_encoded(x)?;
        if pred.len() != targets.len() || pred.is_empty() {
            return Err(PasdfError::input("targets do not match the batch"));
        }
        Ok(pred.iter().zip(targets).map(|(&p, &t)| loss.eval(p, t).0).sum::<f64>() / pred.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::clamped_l1_loss;

    fn random_input(rows: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, dim), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_network_outputs_zero_then_bias() {
        let arch = Architecture::new(39, 16);
        let mut model = SdfModel::zeros(arch).unwrap();
        let x = vec![0.3; 39];
        assert_eq!(model.forward(&x, None).unwrap(), 0.0);
        model.layers_mut()[7].bias[0] = 0.25;
        assert_eq!(model.forward(&x, None).unwrap(), 0.25);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = SdfModel::new(Architecture::new(39, 8), 0).unwrap();
        assert!(model.forward(&[0.0; 3], None).is_err());
    }

    #[test]
    fn layer_shapes_include_skip_widening() {
        let arch = Architecture::new(39, 64);
        assert_eq!(arch.layer_shape(0), (64, 39));
        assert_eq!(arch.layer_shape(3), (64, 103));
        assert_eq!(arch.layer_shape(7), (1, 64));
        let model = SdfModel::new(arch, 1).unwrap();
        assert_eq!(model.layers()[3].direction.dim(), (64, 103));
    }

    #[test]
    fn initial_effective_weights_equal_directions() {
        let model = SdfModel::new(Architecture::new(3, 8), 4).unwrap();
        for layer in &model.layers()[..7] {
            let diff = (&layer.effective_weight() - &layer.direction).mapv(f64::abs);
            assert!(diff.iter().all(|&d| d < 1e-14));
        }
    }

    #[test]
    fn batch_prediction_matches_single_forward() {
        let model = SdfModel::new(Architecture::new(9, 16), 2).unwrap();
        let x = random_input(600, 9, 3);
        let batch = model.predict_encoded(x.view()).unwrap();
        for (row, b) in x.rows().into_iter().zip(&batch).step_by(37) {
            let single = model.forward(row.as_slice().unwrap(), None).unwrap();
            assert!((single - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_a_direction_row_changes_nothing() {
        let model = SdfModel::new(Architecture::new(9, 16), 5).unwrap();
        let mut scaled = model.clone();
        scaled.layers_mut()[2].direction.row_mut(4).mapv_inplace(|v| v * 7.5);
        scaled.layers_mut()[0].direction.row_mut(0).mapv_inplace(|v| v * 0.01);
        let x = random_input(50, 9, 6);
        let a = model.predict_encoded(x.view()).unwrap();
        let b = scaled.predict_encoded(x.view()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let model = SdfModel::new(Architecture::new(9, 32), 7).unwrap();
        let x = vec![0.2; 9];
        let eval = model.forward(&x, None).unwrap();
        assert_eq!(eval, model.forward(&x, None).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trained: Vec<f64> = (0..10).map(|_| model.forward(&x, Some(&mut rng)).unwrap()).collect();
        assert!(trained.iter().any(|&t| t != eval));
    }

    #[test]
    fn loss_matches_per_sample_definition() {
        let model = SdfModel::new(Architecture::new(9, 16), 8).unwrap();
        let x = random_input(40, 9, 9);
        let targets: Vec<f64> = (0..40).map(|i| (i as f64 - 20.0) * 0.01).collect();
        let cfg = LossConfig::default();
        let pred = model.predict_encoded(x.view()).unwrap();
        let expected = pred.iter().zip(&targets).map(|(&p, &t)| clamped_l1_loss(p, t, 0.1)).sum::<f64>() / 40.0;
        let (loss, _) = model.loss_and_gradients(x.view(), &targets, &cfg, None).unwrap();
        assert!((loss - expected).abs() < 1e-14);
    }

    #[test]
    fn saturated_predictions_have_zero_gradient() {
        let mut model = SdfModel::new(Architecture::new(9, 16), 10).unwrap();
        model.layers_mut()[7].bias[0] = 5.0;
        let x = random_input(8, 9, 11);
        let pred = model.predict_encoded(x.view()).unwrap();
        assert!(pred.iter().all(|p| p.abs() > 0.1 + 1e-6));
        let (_, g) = model.loss_and_gradients(x.view(), &[0.0; 8], &LossConfig::default(), None).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn duplicated_batch_gives_identical_gradients() {
        let model = SdfModel::new(Architecture::new(9, 16), 12).unwrap();
        let x = random_input(16, 9, 13);
        let t: Vec<f64> = (0..16).map(|i| 0.005 * i as f64).collect();
        let cfg = LossConfig { d_max: 10.0, clamp_target: false };
        let (l1, g1) = model.loss_and_gradients(x.view(), &t, &cfg, None).unwrap();
        let x2 = concatenate![Axis(0), x, x];
        let t2: Vec<f64> = t.iter().chain(&t).copied().collect();
        let (l2, g2) = model.loss_and_gradients(x2.view(), &t2, &cfg, None).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            assert!(a.direction.iter().zip(&b.direction).all(|(u, v)| (u - v).abs() < 1e-15));
            assert!(a.gain.iter().zip(&b.gain).all(|(u, v)| (u - v).abs() < 1e-15));
        }
    }

    #[test]
    fn gradients_independent_of_thread_count() {
        let model = SdfModel::new(Architecture::new(39, 32), 14).unwrap();
        let x = random_input(1000, 39, 15);
        let t = vec![0.01; 1000];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| model.loss_and_gradients(x.view(), &t, &LossConfig::default(), Some(3)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
