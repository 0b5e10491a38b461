//! Dynamic graphs as an ordered sequence of weighted directed snapshots over
//! a fixed node universe `0..n_global`.
//!
//! A node that is absent from a snapshot keeps its id and simply has no edges
//! there, so per-snapshot vectors always have length `n_global`.

mod build;
mod generate;
mod io;
mod perturb;
mod seeds;
mod synthetic;

use std::collections::BTreeSet;

pub use build::{build_snapshots, largest_component};
pub use generate::generate_ba;
pub use io::{load_temporal_edgelist, parse_temporal_edgelist, read_archive, symmetrize, write_archive};
pub use perturb::{perturb_snapshots, AddedNodeLinks, Perturbation};
pub use seeds::{degree_on, seed_sets, top_degree_set};
pub use synthetic::{assemble, SyntheticBa};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// One timestamped interaction read from an edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEdgeRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub time: f64,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
}

/// A single graph snapshot with both adjacency directions indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    index: usize,
    present: Vec<bool>,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    out_offsets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_order: Vec<usize>,
}

impl Snapshot {
    /// Builds a snapshot over `n_global` ids. Edges are stored sorted by
    /// `(src, dst)`.
    pub fn new(
        index: usize,
        n_global: usize,
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self> {
        let nodes: BTreeSet<NodeId> = nodes.into_iter().collect();
        let mut present = vec![false; n_global];
        for &v in &nodes {
            if v >= n_global {
                return Err(Error::invalid(format!(
                    "snapshot {index}: node {v} outside universe of {n_global}"
                )));
            }
            present[v] = true;
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        edges.sort_by_key(|a| (a.src, a.dst));
        for pair in edges.windows(2) {
            if (pair[0].src, pair[0].dst) == (pair[1].src, pair[1].dst) {
                return Err(Error::invalid(format!(
                    "snapshot {index}: duplicate edge ({}, {})",
                    pair[0].src, pair[0].dst
                )));
            }
        }
        for e in &edges {
            if e.src >= n_global || e.dst >= n_global || !present[e.src] || !present[e.dst] {
                return Err(Error::invalid(format!(
                    "snapshot {index}: edge ({}, {}) has an endpoint outside the snapshot",
                    e.src, e.dst
                )));
            }
            if !(0.0..=1.0).contains(&e.weight) {
                return Err(Error::invalid(format!(
                    "snapshot {index}: edge ({}, {}) weight {} not in [0, 1]",
                    e.src, e.dst, e.weight
                )));
            }
        }

        let mut out_offsets = vec![0usize; n_global + 1];
        let mut in_offsets = vec![0usize; n_global + 1];
        for e in &edges {
            out_offsets[e.src + 1] += 1;
            in_offsets[e.dst + 1] += 1;
        }
        for i in 0..n_global {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut fill = in_offsets.clone();
        let mut in_order = vec![0usize; edges.len()];
        for (k, e) in edges.iter().enumerate() {
            in_order[fill[e.dst]] = k;
            fill[e.dst] += 1;
        }

        Ok(Snapshot {
            index,
            present,
            nodes: nodes.into_iter().collect(),
            edges,
            out_offsets,
            in_offsets,
            in_order,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n_global(&self) -> usize {
        self.present.len()
    }

    /// Present node ids in ascending order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.present.get(v).copied().unwrap_or(false)
    }

    pub fn presence(&self) -> &[bool] {
        &self.present
    }

    pub fn out_edges(&self, u: NodeId) -> &[Edge] {
        &self.edges[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn in_edges(&self, v: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.in_order[self.in_offsets[v]..self.in_offsets[v + 1]]
            .iter()
            .map(move |&k| &self.edges[k])
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn contains_edge(&self, src: NodeId, dst: NodeId) -> bool {
        src < self.n_global()
            && self
                .out_edges(src)
                .binary_search_by(|e| e.dst.cmp(&dst))
                .is_ok()
    }

    fn with_weights(&self, weights: impl Fn(&Edge) -> f64) -> Snapshot {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.weight = weights(e);
        }
        out
    }

    fn widen(&self, n_global: usize) -> Result<Snapshot> {
        Snapshot::new(self.index, n_global, self.nodes.iter().copied(), self.edges.iter().copied())
    }
}

/// An ordered, non-empty sequence of snapshots sharing one node universe.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    n_global: usize,
    snapshots: Vec<Snapshot>,
}

impl DynamicGraph {
    pub fn new(n_global: usize, snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid("a dynamic graph needs at least one snapshot"));
        }
        for (t, s) in snapshots.iter().enumerate() {
            if s.index != t {
                return Err(Error::invalid(format!(
                    "snapshot indices must be contiguous: found {} at position {t}",
                    s.index
                )));
            }
            if s.n_global() != n_global {
                return Err(Error::invalid(format!(
                    "snapshot {t} spans {} ids, graph spans {n_global}",
                    s.n_global()
                )));
            }
        }
        Ok(DynamicGraph { n_global, snapshots })
    }

    /// Builds a graph from per-snapshot node and edge lists, sizing the
    /// universe to the largest id seen.
    pub fn from_lists(lists: Vec<(Vec<NodeId>, Vec<Edge>)>) -> Result<Self> {
        let n_global = lists
            .iter()
            .flat_map(|(nodes, edges)| {
                nodes
                    .iter()
                    .copied()
                    .chain(edges.iter().flat_map(|e| [e.src, e.dst]))
            })
            .max()
            .map_or(0, |m| m + 1);
        let snapshots = lists
            .into_iter()
            .enumerate()
            .map(|(t, (nodes, edges))| Snapshot::new(t, n_global, nodes, edges))
            .collect::<Result<Vec<_>>>()?;
        DynamicGraph::new(n_global, snapshots)
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, t: usize) -> &Snapshot {
        &self.snapshots[t]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("non-empty by construction")
    }

    /// Keeps only the final snapshot, re-indexed as snapshot 0.
    pub fn last_only(&self) -> DynamicGraph {
        let last = self.last();
        let snap = Snapshot::new(0, self.n_global, last.nodes.iter().copied(), last.edges.iter().copied())
            .expect("re-indexing a valid snapshot");
        DynamicGraph {
            n_global: self.n_global,
            snapshots: vec![snap],
        }
    }

    pub(crate) fn widen(&self, n_global: usize) -> Result<DynamicGraph> {
        if n_global == self.n_global {
            return Ok(self.clone());
        }
        let snapshots = self
            .snapshots
            .iter()
            .map(|s| s.widen(n_global))
            .collect::<Result<Vec<_>>>()?;
        DynamicGraph::new(n_global, snapshots)
    }

    /// SHA-256 of the canonical archive encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        write_archive(self, &mut buf).expect("writing to memory");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Sets every in-edge weight of `v` to `1 / d_in(v)`, separately in each
/// snapshot.
pub fn assign_weights(g: &DynamicGraph) -> DynamicGraph {
    let snapshots = g
        .snapshots
        .iter()
        .map(|s| s.with_weights(|e| 1.0 / s.in_degree(e.dst) as f64))
        .collect();
    DynamicGraph {
        n_global: g.n_global,
        snapshots,
    }
}
