use super::{assign_weights, build_snapshots, generate_ba, perturb_snapshots, symmetrize, DynamicGraph, Perturbation,
    TemporalEdgeRecord};
use crate::error::Result;
use crate::rng;

/// Recipe for a perturbed preferential-attachment dynamic graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBa {
    pub n: usize,
    pub m_attach: usize,
    pub n_snapshots: usize,
    pub initial_fraction: f64,
    pub perturbation: Perturbation,
}

impl SyntheticBa {
    /// Undirected BA graph with per-snapshot churn drawn from
    /// `[0, 5%]` of nodes and `[0, 10%]` of edges.
    pub fn churned(n: usize, m_attach: usize, n_snapshots: usize) -> Self {
        SyntheticBa {
            n,
            m_attach,
            n_snapshots,
            initial_fraction: 0.5,
            perturbation: Perturbation {
                sample_fraction: true,
                ..Perturbation::exact(0.05, 0.05, 0.1, 0.1)
            },
        }
    }

    /// Generate, symmetrize, split into snapshots, weight, perturb, and
    /// re-weight.
    pub fn build(&self, seed: u64) -> Result<DynamicGraph> {
        let records = symmetrize(&generate_ba(self.n, self.m_attach, rng::derive_seed(seed, "ba"))?);
        assemble(&records, self.n_snapshots, self.initial_fraction, &self.perturbation, seed)
    }
}

/// Snapshots from an edge list, weighted, perturbed with a stream derived
/// from `seed`, and re-weighted.
pub fn assemble(
    records: &[TemporalEdgeRecord],
    n_snapshots: usize,
    initial_fraction: f64,
    perturbation: &Perturbation,
    seed: u64,
) -> Result<DynamicGraph> {
    let g = assign_weights(&build_snapshots(records, n_snapshots, initial_fraction)?);
    let g = perturb_snapshots(&g, perturbation, rng::derive_seed(seed, "perturb"))?;
    Ok(assign_weights(&g))
}
