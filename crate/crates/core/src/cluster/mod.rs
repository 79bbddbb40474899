//! Deterministic k-means with k-means++ seeding, silhouette scoring and
//! silhouette-based selection of k.

mod kmeans;
mod silhouette;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, ClusterResult};
pub use silhouette::{choose_k, silhouette, ChooseK};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} is invalid for {points} point(s)")]
    InvalidK { k: usize, points: usize },
    #[error("all vectors must share dimension {expected}, found {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least {needed} points are required, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("k range {lo}..={hi} must lie within 2..={max}")]
    InvalidRange { lo: usize, hi: usize, max: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("invalid clustering parameter: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_max_iterations() -> usize {
    300
}
fn default_n_init() -> usize {
    10
}
fn default_tolerance() -> f64 {
    1e-6
}

impl ClusterConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iterations: default_max_iterations(),
            n_init: default_n_init(),
            seed,
            tolerance: default_tolerance(),
        }
    }

    pub fn with_k(self, k: usize) -> Self {
        Self { k, ..self }
    }
}

pub(crate) fn check_dimensions<T>(points: &[Vec<T>]) -> Result<usize, ClusterError> {
    let d = points.first().map_or(0, Vec::len);
    match points.iter().find(|p| p.len() != d) {
        Some(p) => Err(ClusterError::DimensionMismatch {
            expected: d,
            got: p.len(),
        }),
        None => Ok(d),
    }
}
