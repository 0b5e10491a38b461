use std::collections::{BTreeSet, HashSet};

use super::{DynamicGraph, Edge, NodeId, TemporalEdgeRecord};
use crate::error::{Error, Result};

/// Splits a temporal edge list into `t_count` cumulative snapshots.
///
/// Snapshot 0 is the largest weakly connected component of the earliest
/// `initial_fraction` of edges (time order, ties by file order). Every other
/// edge, including initial edges outside that component, is spread over
/// snapshots `1..t_count` in equal contiguous time blocks and added on top of
/// the previous snapshot. Self-loops and repeated `(src, dst)` pairs are
/// dropped, keeping the earliest occurrence.
pub fn build_snapshots(
    records: &[TemporalEdgeRecord],
    t_count: usize,
    initial_fraction: f64,
) -> Result<DynamicGraph> {
    if records.is_empty() {
        return Err(Error::invalid("no edge records to build snapshots from"));
    }
    if t_count == 0 {
        return Err(Error::invalid("snapshot count must be at least 1"));
    }
    if !(initial_fraction > 0.0 && initial_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "initial fraction {initial_fraction} not in (0, 1]"
        )));
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].time.total_cmp(&records[b].time));
    let mut seen = HashSet::new();
    let edges: Vec<Edge> = order
        .into_iter()
        .map(|i| &records[i])
        .filter(|r| r.src != r.dst && seen.insert((r.src, r.dst)))
        .map(|r| Edge {
            src: r.src,
            dst: r.dst,
            weight: r.weight.unwrap_or(1.0),
        })
        .collect();
    if edges.is_empty() {
        return Err(Error::invalid("edge list contains only self-loops"));
    }

    let n_initial = ((initial_fraction * edges.len() as f64).ceil() as usize).clamp(1, edges.len());
    let component: HashSet<NodeId> = largest_component(&edges[..n_initial]).into_iter().collect();
    let mut first = Vec::new();
    let mut rest = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if i < n_initial && component.contains(&e.src) && component.contains(&e.dst) {
            first.push(*e);
        } else {
            rest.push(*e);
        }
    }

    let mut nodes: BTreeSet<NodeId> = component.into_iter().collect();
    let mut current = first;
    let mut lists = vec![(nodes.iter().copied().collect::<Vec<_>>(), current.clone())];
    let blocks = t_count - 1;
    for b in 0..blocks {
        let lo = b * rest.len() / blocks;
        let hi = (b + 1) * rest.len() / blocks;
        for e in &rest[lo..hi] {
            nodes.insert(e.src);
            nodes.insert(e.dst);
            current.push(*e);
        }
        lists.push((nodes.iter().copied().collect(), current.clone()));
    }
    DynamicGraph::from_lists(lists)
}

/// Node set of the largest weakly connected component (most nodes, then most
/// edges, then smallest member id).
pub fn largest_component(edges: &[Edge]) -> Vec<NodeId> {
    let n = edges.iter().map(|e| e.src.max(e.dst) + 1).max().unwrap_or(0);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut touched = vec![false; n];
    for e in edges {
        touched[e.src] = true;
        touched[e.dst] = true;
        let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut size = vec![0usize; n];
    let mut edge_count = vec![0usize; n];
    for v in 0..n {
        if touched[v] {
            let r = find(&mut parent, v);
            size[r] += 1;
        }
    }
    for e in edges {
        let r = find(&mut parent, e.src);
        edge_count[r] += 1;
    }
    // roots are the smallest member id, so scanning upward breaks ties by id
    let best = (0..n)
        .filter(|&v| touched[v] && parent[v] == v)
        .max_by(|&a, &b| {
            (size[a], edge_count[a])
                .cmp(&(size[b], edge_count[b]))
                .then(b.cmp(&a))
        });
    match best {
        Some(root) => (0..n)
            .filter(|&v| touched[v] && find(&mut parent, v) == root)
            .collect(),
        None => Vec::new(),
    }
}
