//! Kolmogorov-Arnold networks with learnable B-spline activations, built
//! for credit default prediction on the GMSC dataset.
//!
//! The crate covers the full pipeline: B-spline bases ([`spline`]), KAN
//! layers ([`network`]), reverse-mode training with Adam ([`training`]),
//! classification metrics ([`metrics`]), CSV ingestion and preprocessing
//! ([`data`]), interpretability exports ([`explain`]), a logistic-regression
//! baseline ([`baseline`]) and the `kan-credit` command line ([`cli`]).

pub mod baseline;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod explain;
pub mod metrics;
pub mod network;
pub mod spline;
pub mod training;

pub use error::{Error, Result};
pub use network::KanNetwork;
pub use training::TrainConfig;
