//! Independent reference implementations used as test oracles. Shared with the
//! acceptance target of the cli crate.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::Point3;
use ndarray::{Array1, Array2};
use pasdf::geom::{apply_transform, compose, PointCloud};
use pasdf::pam::{pose_align, PamParams};
use pasdf::sampling::sample_surface;
use pasdf::sdf::{Architecture, EncodingConfig, Layer, LossConfig, SdfModel};
use pasdf::synth::{bbox_diagonal, generate_shape, pose_error, random_pose, ShapeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------------
// MLP

/// Plain nested-vector copy of a model: effective weights rebuilt from
/// `gain · direction / ‖direction‖` without touching the model's own code.
pub struct RefNet {
    pub dirs: Vec<Vec<Vec<f64>>>,
    pub gains: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    weights: Vec<Vec<Vec<f64>>>,
    skip: Option<usize>,
}

/// Per-sample cache: input to each layer and its pre-activation.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn effective_row(dir: &[f64], gain: f64) -> Vec<f64> {
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter().map(|v| gain * v / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl RefNet {
    pub fn from_model(model: &SdfModel) -> Self {
        let dirs: Vec<Vec<Vec<f64>>> = model
            .layers()
            .iter()
            .map(|l| l.direction.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect();
        let gains: Vec<Vec<f64>> = model.layers().iter().map(|l| l.gain.to_vec()).collect();
        let biases = model.layers().iter().map(|l| l.bias.to_vec()).collect();
        let weights = dirs
            .iter()
            .zip(&gains)
            .map(|(rows, g): (&Vec<Vec<f64>>, &Vec<f64>)| rows.iter().zip(g).map(|(r, &g)| effective_row(r, g)).collect())
            .collect();
        RefNet {
            dirs,
            gains,
            biases,
            weights,
            skip: model.architecture().skip_layer,
        }
    }

    fn layer_input(&self, l: usize, prev: &[f64], x: &[f64]) -> Vec<f64> {
        let mut h = prev.to_vec();
        if self.skip == Some(l) {
            h.extend_from_slice(x);
        }
        h
    }

    fn run_from(&self, l0: usize, mut z: Vec<f64>, x: &[f64], trace: Option<&mut Trace>) -> f64 {
        let last = self.weights.len() - 1;
        let mut trace = trace;
        let mut l = l0;
        loop {
            if let Some(t) = trace.as_deref_mut() {
                t.pre.push(z.clone());
            }
            if l == last {
                return z[0];
            }
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            l += 1;
            let h = self.layer_input(l, &a, x);
            z = self.weights[l].iter().zip(&self.biases[l]).map(|(w, b)| dot(w, &h) + b).collect();
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(h);
            }
        }
    }

    fn trace(&self, x: &[f64]) -> (f64, Trace) {
        let mut t = Trace {
            inputs: vec![x.to_vec()],
            pre: Vec::new(),
        };
        let z0 = self.weights[0].iter().zip(&self.biases[0]).map(|(w, b)| dot(w, x) + b).collect();
        let out = self.run_from(0, z0, x, Some(&mut t));
        (out, t)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.trace(x).0
    }
}

pub fn ref_loss(pred: f64, target: f64, d_max: f64) -> f64 {
    (pred.max(-d_max).min(d_max) - target).abs()
}

/// Which scalar of a layer row is perturbed.
#[derive(Debug, Clone, Copy)]
enum Param {
    Direction(usize),
    Gain,
    Bias,
}

/// Random parameters: Gaussian directions, gains of either sign, small biases.
pub fn random_model(arch: Architecture, rng: &mut ChaCha8Rng) -> SdfModel {
    let layers = (0..arch.num_layers)
        .map(|l| {
            let (o, i) = arch.layer_shape(l);
            let direction = Array2::from_shape_simple_fn((o, i), || rng.sample::<f64, _>(StandardNormal));
            let gain = Array1::from_shape_simple_fn(o, || {
                let g: f64 = 0.6 + 0.8 * rng.random::<f64>();
                if rng.random::<f64>() < 0.2 { -g } else { g }
            });
            let bias = Array1::from_shape_simple_fn(o, || rng.random::<f64>() - 0.5);
            Layer { direction, gain, bias }
        })
        .collect();
    SdfModel::from_layers(arch, layers).expect("valid random layers")
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|analytic − fd| / max(|analytic|, |fd|)` among entries above the absolute floor.
    pub worst_relative: f64,
    pub worst_absolute: f64,
}

pub const GRAD_REL_TOL: f64 = 1e-4;
pub const GRAD_ABS_TOL: f64 = 1e-7;

/// Compares every analytic gradient entry with a central difference of the
/// reference loss. Perturbing one scalar only changes one row of one layer, so
/// the forward pass restarts from that layer with cached inputs.
pub fn gradient_check(model: &SdfModel, inputs: &[Vec<f64>], targets: &[f64], loss: &LossConfig, step: f64) -> GradCheck {
    let n = inputs.len();
    let x = Array2::from_shape_fn((n, inputs[0].len()), |(r, c)| inputs[r][c]);
    let (_, grads) = model.loss_and_gradients(x.view(), targets, loss, None).expect("gradients");
    let net = RefNet::from_model(model);
    let traces: Vec<Trace> = inputs.iter().map(|x| net.trace(x).1).collect();

    let perturbed_loss = |l: usize, row: usize, param: Param, delta: f64| -> f64 {
        let mut dir = net.dirs[l][row].clone();
        let mut gain = net.gains[l][row];
        let mut bias = net.biases[l][row];
        match param {
            Param::Direction(c) => dir[c] += delta,
            Param::Gain => gain += delta,
            Param::Bias => bias += delta,
        }
        let w = effective_row(&dir, gain);
        let mut total = 0.0;
        for ((x, t), &target) in inputs.iter().zip(&traces).zip(targets) {
            let mut z = t.pre[l].clone();
            z[row] = dot(&w, &t.inputs[l]) + bias;
            total += ref_loss(net.run_from(l, z, x, None), target, loss.d_max);
        }
        total / n as f64
    };

    let mut out = GradCheck::default();
    let mut compare = |analytic: f64, fd: f64| {
        out.checked += 1;
        let diff = (analytic - fd).abs();
        out.worst_absolute = out.worst_absolute.max(diff);
        if diff <= GRAD_ABS_TOL {
            return;
        }
        let rel = diff / analytic.abs().max(fd.abs());
        out.worst_relative = out.worst_relative.max(rel);
        if rel > GRAD_REL_TOL {
            out.failures += 1;
        }
    };
    for (l, g) in grads.layers.iter().enumerate() {
        let (rows, cols) = g.direction.dim();
        for row in 0..rows {
            let mut params: Vec<(Param, f64)> = (0..cols).map(|c| (Param::Direction(c), g.direction[[row, c]])).collect();
            params.push((Param::Gain, g.gain[row]));
            params.push((Param::Bias, g.bias[row]));
            for (p, analytic) in params {
                let fd = (perturbed_loss(l, row, p, step) - perturbed_loss(l, row, p, -step)) / (2.0 * step);
                compare(analytic, fd);
            }
        }
    }
    out
}

/// Probe: `num_layers` layers of `width`, no dropout, skip into the middle
/// layer when there is room. Inputs are positionally encoded random points.
pub fn probe_architecture(num_layers: usize, width: usize, encoding: &EncodingConfig) -> Architecture {
    Architecture {
        input_dim: encoding.dim(),
        hidden_width: width,
        num_layers,
        skip_layer: (num_layers >= 4).then_some(num_layers / 2 - 1),
        dropout: 0.0,
    }
}

/// Runs the gradient check at `points` random parameter points; returns the
/// summed report.
pub fn gradient_probe(arch: Architecture, encoding: &EncodingConfig, points: usize, batch: usize, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss = LossConfig {
        d_max: 1.0,
        clamp_target: false,
    };
    let mut total = GradCheck::default();
    for _ in 0..points {
        let model = random_model(arch, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..batch)
            .map(|_| encoding.encode(&Point3::new(rng.random(), rng.random(), rng.random())))
            .collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random::<f64>() - 0.5).collect();
        let c = gradient_check(&model, &inputs, &targets, &loss, 1e-6);
        total.checked += c.checked;
        total.failures += c.failures;
        total.worst_relative = total.worst_relative.max(c.worst_relative);
        total.worst_absolute = total.worst_absolute.max(c.worst_absolute);
    }
    total
}

// ---------------------------------------------------------------------------
// Metrics

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect())
}

pub fn brute_one_sided(from: &PointCloud, to: &PointCloud) -> f64 {
    from.points()
        .iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for q in to.points() {
                let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .sum()
}

pub fn brute_chamfer_metric(a: &PointCloud, b: &PointCloud) -> f64 {
    brute_one_sided(a, b) + brute_one_sided(b, a)
}

pub fn brute_chamfer_loss(a: &PointCloud, b: &PointCloud) -> f64 {
    brute_one_sided(a, b) / a.len() as f64 + brute_one_sided(b, a) / b.len() as f64
}

/// P(positive > negative) + ½ P(tie) over all pairs.
pub fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    wins / pairs as f64
}

/// Random scores (coarsely quantized, so ties occur) with both classes present.
pub fn random_labeled_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..300usize);
    let levels = rng.random_range(2..50u32) as f64;
    let p = rng.random_range(0.05..0.95);
    let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * levels).floor() / levels).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < p).collect();
    labels[0] = true;
    labels[1] = false;
    (scores, labels)
}

fn distance_matrix(a: &PointCloud, b: &PointCloud) -> Vec<Vec<f64>> {
    a.points().iter().map(|p| b.points().iter().map(|q| (p - q).norm()).collect()).collect()
}

/// Minimum over all n! bijections of the per-point cost (summed in index order).
pub fn emd_by_permutations(a: &PointCloud, b: &PointCloud) -> f64 {
    let n = a.len();
    let cost = distance_matrix(a, b);
    (0..n)
        .permutations(n)
        .map(|sigma| sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / n as f64
}

/// Per-point EMD by successive shortest paths on the bipartite flow network,
/// with Bellman–Ford on the residual graph (no potentials, no Hungarian duals).
pub fn emd_by_min_cost_flow(a: &PointCloud, b: &PointCloud) -> f64 {
    let n = a.len();
    let cost = distance_matrix(a, b);
    // Nodes: 0 source, 1..=n left, n+1..=2n right, 2n+1 sink.
    let (source, sink, nodes) = (0, 2 * n + 1, 2 * n + 2);
    let mut edges: Vec<(usize, usize, i32, f64)> = Vec::new(); // (from, to, capacity, cost)
    let add = |edges: &mut Vec<(usize, usize, i32, f64)>, u, v, c| {
        edges.push((u, v, 1, c));
        edges.push((v, u, 0, -c));
    };
    for i in 0..n {
        add(&mut edges, source, 1 + i, 0.0);
        add(&mut edges, n + 1 + i, sink, 0.0);
        for j in 0..n {
            add(&mut edges, 1 + i, n + 1 + j, cost[i][j]);
        }
    }
    let mut total = 0.0;
    for _ in 0..n {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for (e, &(u, v, cap, c)) in edges.iter().enumerate() {
                if cap > 0 && dist[u] + c < dist[v] - 1e-15 {
                    dist[v] = dist[u] + c;
                    via[v] = e;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut v = sink;
        while v != source {
            let e = via[v];
            edges[e].2 -= 1;
            edges[e ^ 1].2 += 1;
            total += edges[e].3;
            v = edges[e].0;
        }
    }
    total / n as f64
}

// ---------------------------------------------------------------------------
// Registration

pub struct RegistrationTrial {
    pub rotation_deg: f64,
    /// Fraction of the bounding-box diagonal.
    pub translation_frac: f64,
    pub converged: bool,
}

impl RegistrationTrial {
    pub fn recovered(&self) -> bool {
        self.rotation_deg < 5.0 && self.translation_frac < 0.02
    }
}

/// Two independent 2000-point samplings of the shape; the source is moved by a
/// random pose (rotation up to 180°, translation up to half the diagonal) and
/// aligned back with default parameters.
pub fn registration_trial(spec: &ShapeSpec, seed: u64) -> RegistrationTrial {
    let mesh = generate_shape(spec, 0).expect("shape");
    let target = sample_surface(&mesh, 2000, 1).expect("target").without_normals();
    let source = sample_surface(&mesh, 2000, 1000 + seed).expect("source").without_normals();
    let diag = bbox_diagonal(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = random_pose(&mut rng, std::f64::consts::PI, 0.5 * diag);
    let moved = apply_transform(&pose, &source);
    let params = PamParams {
        seed,
        ..PamParams::default()
    };
    let result = pose_align(&moved, &target, &params).expect("alignment");
    let (rotation, translation) = pose_error(spec, &compose(&result.cumulative, &pose));
    RegistrationTrial {
        rotation_deg: rotation.to_degrees(),
        translation_frac: translation / diag,
        converged: result.converged,
    }
}
