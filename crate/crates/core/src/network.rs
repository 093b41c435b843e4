//! KAN layers and their composition.
//!
//! Every edge carries `φ(x) = w_b·silu(x) + w_s·spline(x)`; every node sums
//! its incoming edges. All layers share the fixed grid domain `[-1, 1]` and
//! clamp their spline input to it; the silu branch sees the raw input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{KnotVector, LocalBasis, SplineParams};

pub const GRID_MIN: f64 = -1.0;
pub const GRID_MAX: f64 = 1.0;

/// Half-width of the uniform distribution used for initial spline coefficients.
pub const INIT_COEF_SCALE: f64 = 0.1;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationEdge {
    pub w_b: f64,
    pub w_s: f64,
    pub spline: SplineParams,
}

impl ActivationEdge {
    pub fn zeros(knots: &KnotVector) -> Self {
        Self {
            w_b: 0.0,
            w_s: 0.0,
            spline: SplineParams::zeros(knots),
        }
    }

    pub fn forward(&self, knots: &KnotVector, x: f64) -> Result<f64> {
        self.spline.check(knots)?;
        Ok(self.forward_with(&knots.local_basis(x), x))
    }

    #[inline]
    pub(crate) fn forward_with(&self, basis: &LocalBasis, x: f64) -> f64 {
        self.w_b * silu(x) + self.w_s * basis.dot(&self.spline.coefficients)
    }

    pub fn param_count(&self) -> usize {
        2 + self.spline.coefficients.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub knots: KnotVector,
    /// Row-major `n_out × n_in`: edge `(q, p)` lives at `q * n_in + p`.
    pub edges: Vec<ActivationEdge>,
}

impl KanLayer {
    pub fn zeros(n_in: usize, n_out: usize, knots: KnotVector) -> Self {
        let edges = (0..n_in * n_out)
            .map(|_| ActivationEdge::zeros(&knots))
            .collect();
        Self {
            n_in,
            n_out,
            knots,
            edges,
        }
    }

    pub fn edge(&self, q: usize, p: usize) -> &ActivationEdge {
        &self.edges[q * self.n_in + p]
    }

    pub fn edge_mut(&mut self, q: usize, p: usize) -> &mut ActivationEdge {
        &mut self.edges[q * self.n_in + p]
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() != self.n_in * self.n_out {
            return Err(Error::LengthMismatch {
                expected: self.n_in * self.n_out,
                actual: self.edges.len(),
            });
        }
        self.edges
            .iter()
            .try_for_each(|e| e.spline.check(&self.knots))
    }

    /// Node outputs `y_q = Σ_p φ_{q,p}(x_p)` and the `n_out × n_in` edge
    /// outputs that make them up.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                actual: x.len(),
            });
        }
        self.validate()?;
        let bases: Vec<LocalBasis> = x.iter().map(|&v| self.knots.local_basis(v)).collect();
        let mut edge_outputs = vec![0.0; self.n_out * self.n_in];
        let mut y = vec![0.0; self.n_out];
        for q in 0..self.n_out {
            let mut sum = 0.0;
            for p in 0..self.n_in {
                let phi = self.edge(q, p).forward_with(&bases[p], x[p]);
                edge_outputs[q * self.n_in + p] = phi;
                sum += phi;
            }
            y[q] = sum;
        }
        Ok((y, edge_outputs))
    }

    pub fn param_count(&self) -> usize {
        self.edges.iter().map(ActivationEdge::param_count).sum()
    }
}

/// Intermediate values of one layer during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub inputs: Vec<f64>,
    /// Row-major `n_out × n_in`.
    pub edge_outputs: Vec<f64>,
    pub node_sums: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanNetwork {
    pub layers: Vec<KanLayer>,
    pub widths: Vec<usize>,
    pub grid_count: usize,
    pub degree: usize,
    pub seed: u64,
}

pub fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) || widths.last() != Some(&1) {
        return Err(Error::InvalidWidths(widths.to_vec()));
    }
    Ok(())
}

impl KanNetwork {
    /// Network with every parameter set to zero.
    pub fn zeros(widths: &[usize], grid_count: usize, degree: usize) -> Result<Self> {
        validate_widths(widths)?;
        let knots = KnotVector::new(GRID_MIN, GRID_MAX, grid_count, degree)?;
        let layers = widths
            .windows(2)
            .map(|w| KanLayer::zeros(w[0], w[1], knots.clone()))
            .collect();
        Ok(Self {
            layers,
            widths: widths.to_vec(),
            grid_count,
            degree,
            seed: 0,
        })
    }

    /// Seeded initialization: `w_b = w_s = 1`, spline coefficients drawn
    /// uniformly from `[-INIT_COEF_SCALE, INIT_COEF_SCALE]` in canonical
    /// parameter order.
    pub fn init(widths: &[usize], grid_count: usize, degree: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(widths, grid_count, degree)?;
        net.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            for edge in &mut layer.edges {
                edge.w_b = 1.0;
                edge.w_s = 1.0;
                for c in &mut edge.spline.coefficients {
                    *c = rng.gen_range(-INIT_COEF_SCALE..=INIT_COEF_SCALE);
                }
            }
        }
        Ok(net)
    }

    pub fn n_inputs(&self) -> usize {
        self.widths[0]
    }

    /// Checks that layers chain and match the recorded widths.
    pub fn validate(&self) -> Result<()> {
        validate_widths(&self.widths)?;
        if self.layers.len() != self.widths.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} layers for widths {:?}",
                self.layers.len(),
                self.widths
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.n_in != self.widths[l] || layer.n_out != self.widths[l + 1] {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l} is {}x{}, widths say {}x{}",
                    layer.n_out,
                    layer.n_in,
                    self.widths[l + 1],
                    self.widths[l]
                )));
            }
            layer.validate()?;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.len(),
            });
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let (node_sums, edge_outputs) = layer.forward(&current)?;
            let next = node_sums.clone();
            layers.push(LayerTrace {
                inputs: current,
                edge_outputs,
                node_sums,
            });
            current = next;
        }
        Ok(ForwardTrace {
            layers,
            logit: current[0],
        })
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.logit)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Logits for many rows, evaluated in parallel.
    pub fn logits(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        rows.par_iter().map(|r| self.logit(r)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(KanLayer::param_count).sum()
    }

    /// Canonical flattening: layer-major, edges row-major (`q` outer, `p`
    /// inner), each edge as `[w_b, w_s, c_0, c_1, ...]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for edge in &layer.edges {
                out.push(edge.w_b);
                out.push(edge.w_s);
                out.extend_from_slice(&edge.spline.coefficients);
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for edge in &mut layer.edges {
                edge.w_b = it.next().unwrap();
                edge.w_s = it.next().unwrap();
                for c in &mut edge.spline.coefficients {
                    *c = it.next().unwrap();
                }
            }
        }
        Ok(())
    }
}
