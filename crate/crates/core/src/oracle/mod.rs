//! Ground-truth susceptibility: Monte-Carlo estimation, exact enumeration on
//! tiny instances, and dataset generation for training.

mod dataset;
mod exact;
mod mc;

pub use dataset::{generate_ground_truth, GroundTruthDataset, GroundTruthRecord};
pub use exact::{exact_susceptibility, MAX_EXACT_OUTCOMES, MAX_LT_EXACT_NODES};
pub use mc::{estimate_susceptibility, estimate_susceptibility_serial};

use crate::dyngraph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSource {
    MonteCarlo { n_simulations: usize },
    Exact,
}

/// Per-timestamp, per-node probability of being influenced by `seeds`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityTable {
    /// `values[t][v]`
    pub values: Vec<Vec<f64>>,
    pub seeds: Vec<NodeId>,
    pub source: TableSource,
    /// Expected number of influenced nodes after each snapshot, computed
    /// from set sizes rather than from `values`.
    pub spread: Vec<f64>,
}

impl SusceptibilityTable {
    pub fn n_snapshots(&self) -> usize {
        self.values.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn n_simulations(&self) -> Option<usize> {
        match self.source {
            TableSource::MonteCarlo { n_simulations } => Some(n_simulations),
            TableSource::Exact => None,
        }
    }

    /// Values after the last snapshot (the training target).
    pub fn final_values(&self) -> &[f64] {
        self.values.last().map_or(&[], Vec::as_slice)
    }

    /// Whether every node's value is non-decreasing over time.
    pub fn is_monotone(&self) -> bool {
        self.values
            .windows(2)
            .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    pub fn max_abs_diff(&self, other: &SusceptibilityTable) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
