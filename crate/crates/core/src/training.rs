//! Reverse-mode gradients through a [`KanNetwork`], Adam, and the training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{sigmoid, silu, silu_derivative, KanNetwork};
use crate::spline::LocalBasis;

/// Samples per parallel work unit. Partial sums are always combined in
/// chunk order, so results do not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub widths: Vec<usize>,
    pub grid_count: usize,
    pub degree: usize,
    pub learning_rate: f64,
    pub steps: usize,
    /// `-1` trains on the full batch every step.
    pub batch_size: i64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: vec![10, 4, 1],
            grid_count: 30,
            degree: 4,
            learning_rate: 0.1,
            steps: 100,
            batch_size: -1,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.steps < 1 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.batch_size != -1 && self.batch_size < 1 {
            return Err(Error::InvalidConfig(format!(
                "batch_size must be -1 or positive, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update; `t` counts from 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    if t < 1 {
        return Err(Error::InvalidConfig("adam step index starts at 1".into()));
    }
    let t = t.min(i32::MAX as u64) as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Numerically stable `max(z, 0) - z·y + ln(1 + e^{-|z|})`.
pub fn bce_with_logits(logit: f64, label: u8) -> Result<f64> {
    if label > 1 {
        return Err(Error::InvalidLabel(label));
    }
    Ok(bce_unchecked(logit, label as f64))
}

#[inline]
fn bce_unchecked(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn check_batch(net: &KanNetwork, xs: &[Vec<f64>], ys: &[u8]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if let Some(&bad) = ys.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidLabel(bad));
    }
    let d = net.n_inputs();
    if let Some(row) = xs.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    net.validate()
}

/// Mean BCE loss of the network over a batch.
pub fn mean_loss(net: &KanNetwork, xs: &[Vec<f64>], ys: &[u8]) -> Result<f64> {
    check_batch(net, xs, ys)?;
    let idx: Vec<usize> = (0..xs.len()).collect();
    let partial: Vec<f64> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&i| {
                    let z = net.logit(&xs[i]).expect("batch validated");
                    bce_unchecked(z, ys[i] as f64)
                })
                .sum::<f64>()
        })
        .collect();
    Ok(partial.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-sample scratch space for one forward/backward pass.
struct Workspace {
    /// Per layer: inputs to the layer and their silu values.
    inputs: Vec<Vec<f64>>,
    silus: Vec<Vec<f64>>,
    /// Per layer, per input: local basis values.
    values: Vec<Vec<LocalBasis>>,
    /// Per layer, per input: local basis derivatives (unused for layer 0).
    derivs: Vec<Vec<LocalBasis>>,
    /// Per layer, per edge: spline branch value.
    splines: Vec<Vec<f64>>,
    grad_out: Vec<f64>,
    grad_in: Vec<f64>,
}

impl Workspace {
    fn new(net: &KanNetwork) -> Self {
        let per_input = |_| Vec::new();
        Self {
            inputs: net.layers.iter().map(|l| vec![0.0; l.n_in]).collect(),
            silus: net.layers.iter().map(|l| vec![0.0; l.n_in]).collect(),
            values: net.layers.iter().map(per_input).collect(),
            derivs: net.layers.iter().map(per_input).collect(),
            splines: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.edges.len()])
                .collect(),
            grad_out: Vec::new(),
            grad_in: Vec::new(),
        }
    }
}

/// Accumulates the unscaled gradient of one sample's loss into `grad` and
/// returns the loss.
fn accumulate_sample(
    net: &KanNetwork,
    offsets: &[usize],
    x: &[f64],
    y: f64,
    ws: &mut Workspace,
    grad: &mut [f64],
) -> Result<f64> {
    ws.inputs[0].copy_from_slice(x);
    let depth = net.layers.len();
    let mut logit = 0.0;
    for (l, layer) in net.layers.iter().enumerate() {
        ws.values[l].clear();
        ws.derivs[l].clear();
        for p in 0..layer.n_in {
            let v = ws.inputs[l][p];
            ws.silus[l][p] = silu(v);
            // the first layer's inputs are data, so no input gradient is needed
            if l == 0 {
                ws.values[l].push(layer.knots.local_basis(v));
            } else {
                let (b, d) = layer.knots.local_basis_with_derivatives(v)?;
                ws.values[l].push(b);
                ws.derivs[l].push(d);
            }
        }
        let n_in = layer.n_in;
        for q in 0..layer.n_out {
            let mut sum = 0.0;
            for p in 0..n_in {
                let edge = &layer.edges[q * n_in + p];
                let spline = ws.values[l][p].dot(&edge.spline.coefficients);
                ws.splines[l][q * n_in + p] = spline;
                sum += edge.w_b * ws.silus[l][p] + edge.w_s * spline;
            }
            if l + 1 < depth {
                ws.inputs[l + 1][q] = sum;
            } else {
                logit = sum;
            }
        }
    }

    let loss = bce_unchecked(logit, y);
    ws.grad_out.clear();
    ws.grad_out.push(sigmoid(logit) - y);

    for (l, layer) in net.layers.iter().enumerate().rev() {
        let n_in = layer.n_in;
        let stride = 2 + layer.knots.num_basis();
        let need_input_grad = l > 0;
        ws.grad_in.clear();
        ws.grad_in.resize(n_in, 0.0);
        for q in 0..layer.n_out {
            let g = ws.grad_out[q];
            if g == 0.0 {
                continue;
            }
            for p in 0..n_in {
                let e = q * n_in + p;
                let edge = &layer.edges[e];
                let values = &ws.values[l][p];
                let off = offsets[l] + e * stride;
                grad[off] += g * ws.silus[l][p];
                grad[off + 1] += g * ws.splines[l][e];
                let gs = g * edge.w_s;
                let coef_grad = &mut grad[off + 2 + values.first..];
                for (c, b) in coef_grad.iter_mut().zip(values.values()) {
                    *c += gs * b;
                }
                if need_input_grad {
                    let xp = ws.inputs[l][p];
                    ws.grad_in[p] += g
                        * (edge.w_b * silu_derivative(xp)
                            + edge.w_s * ws.derivs[l][p].dot(&edge.spline.coefficients));
                }
            }
        }
        std::mem::swap(&mut ws.grad_out, &mut ws.grad_in);
    }
    Ok(loss)
}

fn layer_offsets(net: &KanNetwork) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(net.layers.len());
    let mut acc = 0;
    for layer in &net.layers {
        offsets.push(acc);
        acc += layer.param_count();
    }
    offsets
}

fn backward_rows(
    net: &KanNetwork,
    xs: &[Vec<f64>],
    ys: &[u8],
    rows: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let n_params = net.param_count();
    let offsets = layer_offsets(net);
    let partial: Vec<(f64, Vec<f64>)> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::new(net);
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            for &i in chunk {
                loss += accumulate_sample(net, &offsets, &xs[i], ys[i] as f64, &mut ws, &mut grad)?;
            }
            Ok((loss, grad))
        })
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in &partial {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / rows.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Mean BCE loss over the batch and its gradient in canonical parameter order.
pub fn backward(net: &KanNetwork, xs: &[Vec<f64>], ys: &[u8]) -> Result<(f64, Vec<f64>)> {
    check_batch(net, xs, ys)?;
    if net.degree == 0 {
        return Err(Error::UnsupportedDegree);
    }
    let rows: Vec<usize> = (0..xs.len()).collect();
    backward_rows(net, xs, ys, &rows)
}

/// Worst relative disagreement between [`backward`] and central finite
/// differences of [`mean_loss`]. Entries where both gradients are at most
/// `1e-7` in magnitude are skipped.
pub fn grad_check(net: &KanNetwork, xs: &[Vec<f64>], ys: &[u8], eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let (_, analytic) = backward(net, xs, ys)?;
    let base = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + eps;
        probe.set_params(&params)?;
        let up = mean_loss(&probe, xs, ys)?;
        params[i] = base[i] - eps;
        probe.set_params(&params)?;
        let down = mean_loss(&probe, xs, ys)?;
        params[i] = base[i];
        let numeric = (up - down) / (2.0 * eps);
        let scale = analytic[i].abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss at the start of each step.
    pub loss_history: Vec<f64>,
    pub wall_seconds: f64,
}

impl TrainReport {
    /// `step,loss` CSV, steps numbered from 1.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.loss_history.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, l));
        }
        out
    }
}

pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(KanNetwork, TrainReport)> {
    train_on(&dataset.features, &dataset.labels, cfg)
}

/// Trains a freshly initialized network on raw rows.
pub fn train_on(
    xs: &[Vec<f64>],
    ys: &[u8],
    cfg: &TrainConfig,
) -> Result<(KanNetwork, TrainReport)> {
    cfg.validate()?;
    let mut net = KanNetwork::init(&cfg.widths, cfg.grid_count, cfg.degree, cfg.seed)?;
    check_batch(&net, xs, ys)?;
    if net.degree == 0 {
        return Err(Error::UnsupportedDegree);
    }
    let positives = ys.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == ys.len() {
        log::warn!("training data holds a single class; proceeding anyway");
    }

    let started = Instant::now();
    let n = xs.len();
    let batch = match cfg.batch_size {
        b if b < 1 || b as usize >= n => n,
        b => b as usize,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c_0000_0001);
    let mut cursor = n;

    let adam = cfg.adam();
    let mut state = AdamState::new(net.param_count());
    let mut params = net.params();
    let mut loss_history = Vec::with_capacity(cfg.steps);
    for t in 1..=cfg.steps {
        let rows: &[usize] = if batch == n {
            &order
        } else {
            if cursor + batch > n {
                order.shuffle(&mut shuffler);
                cursor = 0;
            }
            cursor += batch;
            &order[cursor - batch..cursor]
        };
        let (loss, grad) = backward_rows(&net, xs, ys, rows)?;
        loss_history.push(loss);
        adam_step(&mut params, &grad, &mut state, t as u64, &adam)?;
        net.set_params(&params)?;
    }
    Ok((
        net,
        TrainReport {
            loss_history,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    ))
}
