use std::collections::{BTreeSet, HashSet};

use rand::seq::index::sample;
use rand::Rng;

use super::{DynamicGraph, Edge, NodeId};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// How a freshly added node is wired into its snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddedNodeLinks {
    Out,
    In,
    Both,
}

/// Per-snapshot random churn applied to snapshots `1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub node_add: f64,
    pub node_del: f64,
    pub edge_add: f64,
    pub edge_del: f64,
    /// When set, each snapshot draws each fraction uniformly from
    /// `[0, fraction]` instead of applying it exactly.
    pub sample_fraction: bool,
    /// Nodes that node deletion never picks (typically seed candidates).
    pub reserved: Vec<NodeId>,
    pub added_node_links: AddedNodeLinks,
}

impl Perturbation {
    pub fn none() -> Self {
        Perturbation::exact(0.0, 0.0, 0.0, 0.0)
    }

    pub fn exact(node_add: f64, node_del: f64, edge_add: f64, edge_del: f64) -> Self {
        Perturbation {
            node_add,
            node_del,
            edge_add,
            edge_del,
            sample_fraction: false,
            reserved: Vec::new(),
            added_node_links: AddedNodeLinks::Both,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("node_add", self.node_add),
            ("node_del", self.node_del),
            ("edge_add", self.edge_add),
            ("edge_del", self.edge_del),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::invalid(format!("{name} fraction {f} not in [0, 1)")));
            }
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.node_add == 0.0 && self.node_del == 0.0 && self.edge_add == 0.0 && self.edge_del == 0.0
    }
}

/// Applies node/edge deletions and additions independently to each snapshot
/// `t > 0`, relative to that snapshot's own unperturbed contents. Counts are
/// `round(fraction * count)`. Deleted nodes take their incident edges with
/// them. Added nodes get fresh ids above the current universe and link to
/// nodes that were present in snapshot `t - 1`.
///
/// New edges carry weight 1; callers re-run
/// [`assign_weights`](super::assign_weights) afterwards.
pub fn perturb_snapshots(g: &DynamicGraph, p: &Perturbation, rng_seed: u64) -> Result<DynamicGraph> {
    p.validate()?;
    if p.is_identity() {
        return Ok(g.clone());
    }
    let reserved: HashSet<NodeId> = p.reserved.iter().copied().collect();
    let mut next_id = g.n_global();
    let mut lists = Vec::with_capacity(g.n_snapshots());
    let s0 = g.snapshot(0);
    lists.push((s0.nodes().to_vec(), s0.edges().to_vec()));

    for t in 1..g.n_snapshots() {
        let mut rng = rng::stream(rng_seed, t as u64);
        let snap = g.snapshot(t);
        let prev_nodes: BTreeSet<NodeId> = lists[t - 1].0.iter().copied().collect();
        let mut nodes: BTreeSet<NodeId> = snap.nodes().iter().copied().collect();
        let mut edges: Vec<Edge> = snap.edges().to_vec();
        let n_edges = edges.len();

        let f_node_del = fraction(&mut rng, p.node_del, p.sample_fraction);
        let f_edge_del = fraction(&mut rng, p.edge_del, p.sample_fraction);
        let f_edge_add = fraction(&mut rng, p.edge_add, p.sample_fraction);
        let f_node_add = fraction(&mut rng, p.node_add, p.sample_fraction);

        // node deletion
        let candidates: Vec<NodeId> = nodes.iter().copied().filter(|v| !reserved.contains(v)).collect();
        let k = amount(f_node_del, candidates.len());
        let doomed: HashSet<NodeId> = sample(&mut rng, candidates.len(), k)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        nodes.retain(|v| !doomed.contains(v));
        edges.retain(|e| !doomed.contains(&e.src) && !doomed.contains(&e.dst));

        // edge deletion
        let k = amount(f_edge_del, n_edges).min(edges.len());
        let drop: HashSet<usize> = sample(&mut rng, edges.len(), k).into_iter().collect();
        edges = edges
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, e)| e)
            .collect();

        // edge addition between surviving nodes
        let mut existing: HashSet<(NodeId, NodeId)> = edges.iter().map(|e| (e.src, e.dst)).collect();
        let pool: Vec<NodeId> = nodes.iter().copied().collect();
        let want = amount(f_edge_add, n_edges);
        let mut added = 0;
        let mut attempts = 0;
        while added < want && pool.len() >= 2 && attempts < 100 * want + 100 {
            attempts += 1;
            let u = pool[rng.gen_range(0..pool.len())];
            let v = pool[rng.gen_range(0..pool.len())];
            if u != v && existing.insert((u, v)) {
                edges.push(Edge { src: u, dst: v, weight: 1.0 });
                added += 1;
            }
        }

        // node addition, wired to nodes carried over from t - 1
        let anchors: Vec<NodeId> = {
            let carried: Vec<NodeId> = pool.iter().copied().filter(|v| prev_nodes.contains(v)).collect();
            if carried.is_empty() {
                pool.clone()
            } else {
                carried
            }
        };
        let k = amount(f_node_add, snap.nodes().len());
        if !anchors.is_empty() {
            for _ in 0..k {
                let v = next_id;
                next_id += 1;
                nodes.insert(v);
                if matches!(p.added_node_links, AddedNodeLinks::Out | AddedNodeLinks::Both) {
                    let target = anchors[rng.gen_range(0..anchors.len())];
                    edges.push(Edge { src: v, dst: target, weight: 1.0 });
                }
                if matches!(p.added_node_links, AddedNodeLinks::In | AddedNodeLinks::Both) {
                    let source = anchors[rng.gen_range(0..anchors.len())];
                    edges.push(Edge { src: source, dst: v, weight: 1.0 });
                }
            }
        }
        lists.push((nodes.into_iter().collect(), edges));
    }

    let n_global = next_id;
    let graph = DynamicGraph::from_lists(lists)?;
    graph.widen(n_global)
}

fn fraction(rng: &mut StreamRng, max: f64, sampled: bool) -> f64 {
    if sampled && max > 0.0 {
        rng.gen::<f64>() * max
    } else {
        max
    }
}

fn amount(fraction: f64, count: usize) -> usize {
    ((fraction * count as f64).round() as usize).min(count)
}
