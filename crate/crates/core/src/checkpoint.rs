//! Self-describing JSON checkpoints for KAN and logistic models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::LogisticModel;
use crate::error::{Error, Result};
use crate::network::KanNetwork;
use crate::spline::KnotVector;

const KAN_FORMAT: &str = "kan-checkpoint";
const LOGISTIC_FORMAT: &str = "logistic-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotRange {
    pub range_min: f64,
    pub range_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanCheckpoint {
    pub format: String,
    pub version: u32,
    pub widths: Vec<usize>,
    pub grid_count: usize,
    pub degree: usize,
    pub seed: u64,
    pub knot_ranges: Vec<KnotRange>,
    pub param_count: usize,
    pub params: Vec<f64>,
}

impl KanCheckpoint {
    pub fn from_network(net: &KanNetwork) -> Self {
        Self {
            format: KAN_FORMAT.to_string(),
            version: VERSION,
            widths: net.widths.clone(),
            grid_count: net.grid_count,
            degree: net.degree,
            seed: net.seed,
            knot_ranges: net
                .layers
                .iter()
                .map(|l| KnotRange {
                    range_min: l.knots.range_min(),
                    range_max: l.knots.range_max(),
                })
                .collect(),
            param_count: net.param_count(),
            params: net.params(),
        }
    }

    pub fn into_network(self) -> Result<KanNetwork> {
        if self.format != KAN_FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format {} v{}",
                self.format, self.version
            )));
        }
        let mut net = KanNetwork::zeros(&self.widths, self.grid_count, self.degree)?;
        net.seed = self.seed;
        if self.knot_ranges.len() != net.layers.len() {
            return Err(Error::Checkpoint(format!(
                "{} knot ranges for {} layers",
                self.knot_ranges.len(),
                net.layers.len()
            )));
        }
        for (layer, range) in net.layers.iter_mut().zip(&self.knot_ranges) {
            layer.knots = KnotVector::new(
                range.range_min,
                range.range_max,
                self.grid_count,
                self.degree,
            )?;
        }
        if self.param_count != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "param_count {} but {} params stored",
                self.param_count,
                self.params.len()
            )));
        }
        net.set_params(&self.params)?;
        Ok(net)
    }
}

pub fn network_to_json(net: &KanNetwork) -> String {
    serde_json::to_string_pretty(&KanCheckpoint::from_network(net))
        .expect("checkpoint serialization cannot fail")
}

pub fn network_from_json(text: &str) -> Result<KanNetwork> {
    let ckpt: KanCheckpoint =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    ckpt.into_network()
}

pub fn save_network(net: &KanNetwork, path: &Path) -> Result<()> {
    fs::write(path, network_to_json(net) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<KanNetwork> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    network_from_json(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogisticCheckpoint {
    format: String,
    version: u32,
    seed: u64,
    weights: Vec<f64>,
    bias: f64,
}

pub fn save_logistic(model: &LogisticModel, seed: u64, path: &Path) -> Result<()> {
    let ckpt = LogisticCheckpoint {
        format: LOGISTIC_FORMAT.to_string(),
        version: VERSION,
        seed,
        weights: model.weights.clone(),
        bias: model.bias,
    };
    let text = serde_json::to_string_pretty(&ckpt).expect("checkpoint serialization cannot fail");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_logistic(path: &Path) -> Result<LogisticModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: LogisticCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ckpt.format != LOGISTIC_FORMAT {
        return Err(Error::Checkpoint(format!(
            "unsupported format {}",
            ckpt.format
        )));
    }
    Ok(LogisticModel {
        weights: ckpt.weights,
        bias: ckpt.bias,
    })
}
