//! Feature attribution, structure export and per-sample decision paths.
//!
//! Each edge is scored by the population standard deviation of its output
//! over a dataset. Feature scores come from a backward sweep: output nodes
//! start at 1, and every node hands its score to its inputs in proportion
//! to their edge scores.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::KanNetwork;

/// Floor for a node's total incoming edge score in the backward sweep.
pub const DIVISION_GUARD: f64 = 1e-12;

/// Per-layer `n_out × n_in` edge scores, row-major like the layer edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScoreMatrix {
    pub layers: Vec<LayerScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerScores {
    pub n_in: usize,
    pub n_out: usize,
    pub scores: Vec<f64>,
}

impl LayerScores {
    pub fn get(&self, q: usize, p: usize) -> f64 {
        self.scores[q * self.n_in + p]
    }
}

impl EdgeScoreMatrix {
    pub fn matches(&self, net: &KanNetwork) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(s, l)| {
                s.n_in == l.n_in && s.n_out == l.n_out && s.scores.len() == l.edges.len()
            })
    }
}

/// Standard deviation of every edge output over the rows of `dataset`.
pub fn edge_scores(net: &KanNetwork, dataset: &Dataset) -> Result<EdgeScoreMatrix> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    // Welford accumulators per edge
    let mut mean: Vec<Vec<f64>> = net
        .layers
        .iter()
        .map(|l| vec![0.0; l.edges.len()])
        .collect();
    let mut m2 = mean.clone();
    for (n, row) in dataset.features.iter().enumerate() {
        let trace = net.forward(row)?;
        let k = (n + 1) as f64;
        for (l, lt) in trace.layers.iter().enumerate() {
            for (e, &v) in lt.edge_outputs.iter().enumerate() {
                let delta = v - mean[l][e];
                mean[l][e] += delta / k;
                m2[l][e] += delta * (v - mean[l][e]);
            }
        }
    }
    let n = dataset.len() as f64;
    let layers = net
        .layers
        .iter()
        .zip(m2)
        .map(|(layer, m2)| LayerScores {
            n_in: layer.n_in,
            n_out: layer.n_out,
            scores: m2.into_iter().map(|s| (s / n).max(0.0).sqrt()).collect(),
        })
        .collect();
    Ok(EdgeScoreMatrix { layers })
}

/// Input-node scores from the backward sweep over `scores`.
pub fn propagate_scores(scores: &EdgeScoreMatrix) -> Vec<f64> {
    let Some(last) = scores.layers.last() else {
        return Vec::new();
    };
    let mut node = vec![1.0; last.n_out];
    for layer in scores.layers.iter().rev() {
        let mut below = vec![0.0; layer.n_in];
        for (q, &mass) in node.iter().enumerate() {
            let incoming: f64 = (0..layer.n_in).map(|p| layer.get(q, p)).sum();
            let denom = incoming.max(DIVISION_GUARD);
            for (p, b) in below.iter_mut().enumerate() {
                *b += mass * layer.get(q, p) / denom;
            }
        }
        node = below;
    }
    node
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionReport {
    pub feature_names: Vec<String>,
    pub raw_scores: Vec<f64>,
    /// Raw scores divided by their sum (all zero when the sum is zero).
    pub normalized_scores: Vec<f64>,
    /// Feature indices by descending score, ties by index.
    pub ranking: Vec<usize>,
    pub dataset_fingerprint: String,
    pub model_fingerprint: String,
}

impl AttributionReport {
    /// 1-based rank of feature `j`.
    pub fn rank_of(&self, j: usize) -> usize {
        self.ranking
            .iter()
            .position(|&r| r == j)
            .expect("ranking is a permutation")
            + 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,score,normalized_score,rank\n");
        for j in 0..self.raw_scores.len() {
            let _ = writeln!(
                out,
                "x{j},{:.6},{:.6},{}",
                self.raw_scores[j],
                self.normalized_scores[j],
                self.rank_of(j)
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset_fingerprint={}", self.dataset_fingerprint);
        let _ = writeln!(out, "model_fingerprint={}", self.model_fingerprint);
        for (rank, &j) in self.ranking.iter().enumerate() {
            let _ = writeln!(
                out,
                "rank {}: x{j} ({}) score={:.6} normalized={:.6}",
                rank + 1,
                self.feature_names[j],
                self.raw_scores[j],
                self.normalized_scores[j]
            );
        }
        out
    }
}

pub fn rank_features(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    for (row, y) in dataset.features.iter().zip(&dataset.labels) {
        for v in row {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([*y]);
    }
    format!("{:x}", h.finalize())[..16].to_string()
}

pub fn model_fingerprint(net: &KanNetwork) -> String {
    let mut h = Sha256::new();
    for w in &net.widths {
        h.update((*w as u64).to_le_bytes());
    }
    h.update((net.grid_count as u64).to_le_bytes());
    h.update((net.degree as u64).to_le_bytes());
    for v in net.params() {
        h.update(v.to_bits().to_le_bytes());
    }
    format!("{:x}", h.finalize())[..16].to_string()
}

pub fn feature_attribution(net: &KanNetwork, dataset: &Dataset) -> Result<AttributionReport> {
    let scores = edge_scores(net, dataset)?;
    let raw_scores = propagate_scores(&scores);
    let total: f64 = raw_scores.iter().sum();
    let normalized_scores = raw_scores
        .iter()
        .map(|s| if total > 0.0 { s / total } else { 0.0 })
        .collect();
    let feature_names = if dataset.feature_names.len() == raw_scores.len() {
        dataset.feature_names.clone()
    } else {
        (0..raw_scores.len()).map(|j| format!("x{j}")).collect()
    };
    Ok(AttributionReport {
        feature_names,
        ranking: rank_features(&raw_scores),
        raw_scores,
        normalized_scores,
        dataset_fingerprint: dataset_fingerprint(dataset),
        model_fingerprint: model_fingerprint(net),
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Layered `digraph` of the network: one node per neuron, one edge per
/// activation, annotated with its score and a pen width proportional to
/// the score relative to the largest one.
pub fn export_dot(
    net: &KanNetwork,
    scores: &EdgeScoreMatrix,
    input_labels: &[String],
) -> Result<String> {
    if !scores.matches(net) {
        return Err(Error::ShapeMismatch(
            "edge scores do not match the network".into(),
        ));
    }
    let max_score = scores
        .layers
        .iter()
        .flat_map(|l| l.scores.iter().copied())
        .fold(0.0_f64, f64::max);
    let depth = net.widths.len() - 1;

    let mut out = String::new();
    out.push_str("digraph kan {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle, fontsize=10];\n");
    for (l, &width) in net.widths.iter().enumerate() {
        let _ = writeln!(out, "  subgraph layer_{l} {{");
        out.push_str("    rank=same;\n");
        for i in 0..width {
            let label = if l == 0 {
                match input_labels.get(i) {
                    Some(name) => format!("x{i}\\n{}", dot_escape(name)),
                    None => format!("x{i}"),
                }
            } else if l == depth {
                "logit".to_string()
            } else {
                format!("h{l}_{i}")
            };
            let shape = if l == 0 { "box" } else { "circle" };
            let _ = writeln!(out, "    n{l}_{i} [label=\"{label}\", shape={shape}];");
        }
        out.push_str("  }\n");
    }
    for (l, layer) in scores.layers.iter().enumerate() {
        for q in 0..layer.n_out {
            for p in 0..layer.n_in {
                let s = layer.get(q, p);
                let rel = if max_score > 0.0 { s / max_score } else { 0.0 };
                let _ = writeln!(
                    out,
                    "  n{l}_{p} -> n{}_{q} [label=\"{s:.4}\", penwidth={:.3}];",
                    l + 1,
                    0.25 + 4.75 * rel
                );
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub layer: usize,
    pub q: usize,
    pub p: usize,
    pub input: f64,
    pub phi: f64,
    pub node_sum: f64,
    /// `phi / node_sum`, or 0 when the node sum is 0.
    pub share: f64,
}

/// Every edge's contribution for one sample, from inputs to the logit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPath {
    pub steps: Vec<PathStep>,
    pub node_sums: Vec<Vec<f64>>,
    pub logit: f64,
    pub probability: f64,
}

pub fn decision_path(net: &KanNetwork, sample: &[f64]) -> Result<DecisionPath> {
    let trace = net.forward(sample)?;
    let mut steps = Vec::new();
    let mut node_sums = Vec::with_capacity(trace.layers.len());
    for (l, lt) in trace.layers.iter().enumerate() {
        let n_in = lt.inputs.len();
        for (q, &sum) in lt.node_sums.iter().enumerate() {
            for p in 0..n_in {
                let phi = lt.edge_outputs[q * n_in + p];
                steps.push(PathStep {
                    layer: l,
                    q,
                    p,
                    input: lt.inputs[p],
                    phi,
                    node_sum: sum,
                    share: if sum != 0.0 { phi / sum } else { 0.0 },
                });
            }
        }
        node_sums.push(lt.node_sums.clone());
    }
    Ok(DecisionPath {
        steps,
        node_sums,
        logit: trace.logit,
        probability: crate::network::sigmoid(trace.logit),
    })
}

impl DecisionPath {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,q,p,input,phi,node_sum,share\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.layer, s.q, s.p, s.input, s.phi, s.node_sum, s.share
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let depth = self.node_sums.len();
        let mut current = usize::MAX;
        for s in &self.steps {
            if s.layer != current {
                current = s.layer;
                let _ = writeln!(out, "layer {}:", s.layer);
            }
            let src = if s.layer == 0 {
                format!("x{}", s.p)
            } else {
                format!("h{}_{}", s.layer, s.p)
            };
            let dst = if s.layer + 1 == depth {
                "logit".to_string()
            } else {
                format!("h{}_{}", s.layer + 1, s.q)
            };
            let _ = writeln!(
                out,
                "  {src} = {:.6} -> phi = {:+.6} -> {dst} (share {:.4})",
                s.input, s.phi, s.share
            );
        }
        let _ = writeln!(out, "logit = {}", self.logit);
        let _ = writeln!(out, "probability = {:.6}", self.probability);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub layer: usize,
    pub q: usize,
    pub p: usize,
    pub x: f64,
    pub phi: f64,
}

/// Samples every activation at `points_per_edge` uniform points over its
/// layer's grid range.
pub fn sample_activation_curves(
    net: &KanNetwork,
    points_per_edge: usize,
) -> Result<Vec<CurvePoint>> {
    if points_per_edge < 2 {
        return Err(Error::InvalidPointCount(points_per_edge));
    }
    let mut rows = Vec::new();
    for (l, layer) in net.layers.iter().enumerate() {
        let (lo, hi) = (layer.knots.range_min(), layer.knots.range_max());
        let xs: Vec<f64> = (0..points_per_edge)
            .map(|i| {
                if i + 1 == points_per_edge {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points_per_edge - 1) as f64
                }
            })
            .collect();
        for q in 0..layer.n_out {
            for p in 0..layer.n_in {
                let edge = layer.edge(q, p);
                for &x in &xs {
                    rows.push(CurvePoint {
                        layer: l,
                        q,
                        p,
                        x,
                        phi: edge.forward(&layer.knots, x)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn curves_csv(rows: &[CurvePoint]) -> String {
    let mut out = String::from("layer,q,p,x,phi\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.layer, r.q, r.p, r.x, r.phi);
    }
    out
}
