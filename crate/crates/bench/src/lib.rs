//! Shared fixtures for the benchmarks.

use dysuse_core::diffusion::{DiffusionKind, DiffusionModelSpec};
use dysuse_core::dyngraph::{top_degree_set, SyntheticBa};
use dysuse_core::model::{DySuseModel, ModelConfig};
use dysuse_core::{DynamicGraph, NodeId};

pub const SEED: u64 = 42;

/// Churned BA graph with `n` nodes, `m = 3`, `t` snapshots.
pub fn graph(n: usize, t: usize) -> DynamicGraph {
    SyntheticBa::churned(n, 3, t).build(SEED).expect("valid recipe")
}

pub fn model(t: usize) -> DySuseModel {
    DySuseModel::new(ModelConfig::new(t, SEED)).expect("valid config")
}

pub fn seeds(g: &DynamicGraph, k: usize) -> Vec<NodeId> {
    top_degree_set(g, k).expect("graph has at least k nodes")
}

pub fn ic() -> DiffusionModelSpec {
    DiffusionModelSpec::of(DiffusionKind::Ic)
}
