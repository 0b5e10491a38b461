//! Susceptibility estimation in dynamic social networks.
//!
//! The crate covers the whole pipeline: building dynamic graphs from
//! temporal edge lists or a preferential-attachment generator, simulating
//! IC / LT / triggering diffusion across snapshots, Monte-Carlo and exact
//! ground truth, and a trainable estimator that couples a per-snapshot graph
//! network with a progressive feature hand-off and masked temporal
//! self-attention.

pub mod diffusion;
pub mod dyngraph;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod oracle;
pub mod model;
pub mod rng;
pub mod structural;
pub mod temporal;

pub use dyngraph::{DynamicGraph, Edge, NodeId, Snapshot, TemporalEdgeRecord};
pub use error::{Error, Result};
