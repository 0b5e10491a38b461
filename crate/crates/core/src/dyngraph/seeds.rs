use rand::seq::index::sample;

use super::{DynamicGraph, NodeId, Snapshot};
use crate::error::{Error, Result};
use crate::rng;

/// In-degree plus out-degree of `v` in `snap`.
pub fn degree_on(snap: &Snapshot, v: NodeId) -> usize {
    snap.in_degree(v) + snap.out_degree(v)
}

/// The `k` nodes of snapshot 0 with the largest degree, ties to lower ids,
/// returned in ascending id order.
pub fn top_degree_set(g: &DynamicGraph, k: usize) -> Result<Vec<NodeId>> {
    let s0 = g.snapshot(0);
    if k > s0.nodes().len() {
        return Err(Error::invalid(format!(
            "seed size {k} exceeds the {} nodes of snapshot 0",
            s0.nodes().len()
        )));
    }
    let mut ranked: Vec<NodeId> = s0.nodes().to_vec();
    ranked.sort_by(|&a, &b| degree_on(s0, b).cmp(&degree_on(s0, a)).then(a.cmp(&b)));
    let mut top = ranked[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// `count - 1` uniformly random `k`-subsets of snapshot 0 followed by the
/// top-degree set. Each set is sorted ascending.
pub fn seed_sets(g: &DynamicGraph, k: usize, count: usize, rng_seed: u64) -> Result<Vec<Vec<NodeId>>> {
    if count == 0 {
        return Err(Error::invalid("seed set count must be at least 1"));
    }
    let top = top_degree_set(g, k)?;
    let pool = g.snapshot(0).nodes();
    let mut rng = rng::stream(rng_seed, k as u64);
    let mut sets = Vec::with_capacity(count);
    for _ in 0..count - 1 {
        let mut set: Vec<NodeId> = sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
        set.sort_unstable();
        sets.push(set);
    }
    sets.push(top);
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::Edge;

    fn star() -> DynamicGraph {
        // center 3, leaves 0,1,2,4,5
        let edges = [0, 1, 2, 4, 5]
            .into_iter()
            .map(|l| Edge { src: 3, dst: l, weight: 1.0 })
            .collect();
        DynamicGraph::from_lists(vec![(vec![0, 1, 2, 3, 4, 5], edges)]).unwrap()
    }

    #[test]
    fn single_count_is_top_degree_only() {
        let sets = seed_sets(&star(), 1, 1, 0).unwrap();
        assert_eq!(sets, vec![vec![3]]);
    }

    #[test]
    fn top_degree_ties_go_to_lower_ids() {
        assert_eq!(top_degree_set(&star(), 2).unwrap(), vec![0, 3]);
    }

    #[test]
    fn random_sets_are_valid_and_deterministic() {
        let g = star();
        let a = seed_sets(&g, 3, 10, 42).unwrap();
        assert_eq!(a, seed_sets(&g, 3, 10, 42).unwrap());
        assert_eq!(a.len(), 10);
        for s in &a {
            assert_eq!(s.len(), 3);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s.iter().all(|&v| g.snapshot(0).contains(v)));
        }
        assert_eq!(a.last().unwrap(), &top_degree_set(&g, 3).unwrap());
    }

    #[test]
    fn oversized_k_rejected() {
        assert!(seed_sets(&star(), 7, 2, 0).is_err());
    }
}
