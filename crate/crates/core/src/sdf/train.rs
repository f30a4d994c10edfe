use log::debug;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoding::EncodingConfig;
use super::loss::LossConfig;
use super::model::{Architecture, Gradients, Layer, SdfModel};
use crate::error::{PasdfError, Result};
use crate::sampling::QuerySample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub d_max: f64,
    pub clamp_target: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden_width: usize,
    pub num_layers: usize,
    pub skip_layer: Option<usize>,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            epochs: 2000,
            batch_size: 4096,
            d_max: 0.1,
            clamp_target: false,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden_width: 512,
            num_layers: 8,
            skip_layer: Some(3),
            dropout: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            d_max: self.d_max,
            clamp_target: self.clamp_target,
        }
    }

    pub fn architecture(&self, encoding: &EncodingConfig) -> Architecture {
        Architecture {
            input_dim: encoding.dim(),
            hidden_width: self.hidden_width,
            num_layers: self.num_layers,
            skip_layer: self.skip_layer,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(PasdfError::param("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(PasdfError::param("batch_size must be at least 1"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(PasdfError::param("Adam needs betas in [0, 1) and a positive epsilon"));
        }
        self.loss().validate()?;
        self.architecture(&EncodingConfig::default()).validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SdfModel,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// Decorrelates seeds for named sub-streams.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: i32,
}

fn zeros_like(layers: &[Layer]) -> Vec<Layer> {
    layers
        .iter()
        .map(|l| Layer {
            direction: Array2::zeros(l.direction.dim()),
            gain: Array1::zeros(l.gain.len()),
            bias: Array1::zeros(l.bias.len()),
        })
        .collect()
}

impl Adam {
    fn new(layers: &[Layer]) -> Self {
        Adam {
            m: zeros_like(layers),
            v: zeros_like(layers),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [Layer], grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (lr, eps) = (cfg.learning_rate, cfg.epsilon);
        let apply = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((p, g), m), v) in params.iter_mut().zip(&grads.layers).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut p.direction)
                .and(&g.direction)
                .and(&mut m.direction)
                .and(&mut v.direction)
                .for_each(apply);
            Zip::from(&mut p.gain).and(&g.gain).and(&mut m.gain).and(&mut v.gain).for_each(apply);
            Zip::from(&mut p.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(apply);
        }
    }
}

/// Trains a fresh model on labeled query samples.
pub fn train(samples: &[QuerySample], cfg: &TrainConfig, encoding: &EncodingConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(PasdfError::input("training needs at least one sample"));
    }
    let positions: Vec<_> = samples.iter().map(|s| s.position).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.sdf).collect();
    let x = encoding.encode_batch(&positions);
    let model = SdfModel::new(cfg.architecture(encoding), mix_seed(cfg.seed, 1, 0))?;
    train_model(model, &x, &targets, cfg)
}

/// Continues training `model` with Adam over shuffled mini-batches of the
/// encoded inputs `x`.
pub fn train_model(mut model: SdfModel, x: &Array2<f64>, targets: &[f64], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.nrows() == 0 || x.nrows() != targets.len() {
        return Err(PasdfError::input(format!(
            "{} encoded inputs for {} targets",
            x.nrows(),
            targets.len()
        )));
    }
    let loss_cfg = cfg.loss();
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2, 0));
    let mut adam = Adam::new(model.layers());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let bx = x.select(Axis(0), idx);
            let bt: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            let dropout_seed = (cfg.dropout > 0.0).then(|| mix_seed(cfg.seed, 3 + epoch as u64, batch as u64));
            let (loss, grads) = model.loss_and_gradients(bx.view(), &bt, &loss_cfg, dropout_seed)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(PasdfError::NonFiniteLoss {
                    epoch,
                    batch,
                    param_norm: model.parameter_norm(),
                });
            }
            adam.update(model.layers_mut(), &grads, cfg);
            epoch_loss += loss * idx.len() as f64;
        }
        let mean = epoch_loss / n as f64;
        if epoch % 50 == 0 || epoch + 1 == cfg.epochs {
            debug!("epoch {epoch}: loss {mean:.6}");
        }
        history.push(mean);
    }
    if !model.is_finite() {
        return Err(PasdfError::NonFiniteLoss {
            epoch: cfg.epochs,
            batch: 0,
            param_norm: model.parameter_norm(),
        });
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}
