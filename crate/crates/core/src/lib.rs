//! Multi-metric group fairness auditing for binary decision models.

pub mod audit;
pub mod cluster;
pub mod config;
pub mod error;
pub mod fairmatrix;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod pca;
pub mod pipeline;
pub mod report;
pub mod robustness;
pub mod rng;
pub mod splits;

pub use error::{Error, Result};
