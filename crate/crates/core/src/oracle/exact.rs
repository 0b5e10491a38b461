//! Exact susceptibility by enumerating every joint outcome of the
//! randomness. Only meant for tiny instances used as test oracles.
//!
//! Every random quantity is a discrete variable with finitely many outcomes:
//! * IC edge coins are uniforms `U` cut at `{0, w, 1}` (per snapshot) or at
//!   every weight the pair ever carries (once-ever); the coin fires iff
//!   `U < w` at the moment of the attempt.
//! * TR trigger sets are enumerated per `(node, snapshot)` as subsets of the
//!   uncertain in-neighbours.
//! * LT thresholds are cut at every subset sum of in-weights a node can see,
//!   which is all the diffusion can distinguish.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{SusceptibilityTable, TableSource};
use crate::diffusion::{AttemptPolicy, DiffusionKind, DiffusionModelSpec};
use crate::dyngraph::{DynamicGraph, NodeId};
use crate::error::{Error, Result};

pub const MAX_EXACT_OUTCOMES: u64 = 1 << 20;
pub const MAX_LT_EXACT_NODES: usize = 6;

/// Exact probabilities for every `(t, v)`.
pub fn exact_susceptibility(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
) -> Result<SusceptibilityTable> {
    if let Some(&bad) = seeds.iter().find(|&&s| s >= g.n_global()) {
        return Err(Error::invalid(format!("seed {bad} outside node universe")));
    }
    match (spec.kind, spec.attempt_policy) {
        (DiffusionKind::Lt, _) => exact_lt(g, spec, seeds),
        (DiffusionKind::Tr, AttemptPolicy::PerSnapshot) => exact_tr(g, spec, seeds),
        _ => exact_uniform_coins(g, spec, seeds),
    }
}

/// A uniform on `[0, 1)` cut into intervals; each outcome is the interval
/// midpoint with probability equal to its length.
fn interval_outcomes(mut cuts: Vec<f64>) -> Vec<(f64, f64)> {
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.retain(|c| (0.0..=1.0).contains(c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
        .collect()
}

/// Visits every joint outcome of independent discrete variables with the
/// product probability. `radix[i]` is the outcome count of variable `i`.
fn for_each_world(radix: &[usize], prob: impl Fn(usize, usize) -> f64, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let total = radix
        .iter()
        .try_fold(1u64, |acc, &r| acc.checked_mul(r as u64).filter(|&p| p <= MAX_EXACT_OUTCOMES));
    if total.is_none() {
        return Err(Error::Capacity(format!(
            "{} random variables exceed {MAX_EXACT_OUTCOMES} joint outcomes",
            radix.len()
        )));
    }
    let mut idx = vec![0usize; radix.len()];
    loop {
        let p: f64 = idx.iter().enumerate().map(|(i, &o)| prob(i, o)).product();
        if p > 0.0 {
            visit(&idx, p);
        }
        let mut i = 0;
        loop {
            if i == radix.len() {
                return Ok(());
            }
            idx[i] += 1;
            if idx[i] < radix[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

struct Accumulator {
    values: Vec<Vec<f64>>,
    spread: Vec<f64>,
}

impl Accumulator {
    fn new(g: &DynamicGraph) -> Self {
        Accumulator {
            values: vec![vec![0.0; g.n_global()]; g.n_snapshots()],
            spread: vec![0.0; g.n_snapshots()],
        }
    }

    fn add(&mut self, t: usize, influenced: &[bool], p: f64) {
        let mut count = 0;
        for (v, &hit) in influenced.iter().enumerate() {
            if hit {
                self.values[t][v] += p;
                count += 1;
            }
        }
        self.spread[t] += p * count as f64;
    }

    fn finish(self, seeds: &[NodeId]) -> SusceptibilityTable {
        SusceptibilityTable {
            values: self.values,
            seeds: seeds.to_vec(),
            source: TableSource::Exact,
            spread: self.spread,
        }
    }
}

/// Hop-by-hop cascade where `fires(t, u, v, w)` decides a single attempt.
fn replay_cascade(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    mut fires: impl FnMut(usize, NodeId, NodeId, f64) -> bool,
    mut record: impl FnMut(usize, &[bool]),
) {
    let mut influenced = vec![false; g.n_global()];
    for &s in seeds {
        influenced[s] = true;
    }
    let mut attempted: HashSet<(NodeId, NodeId)> = HashSet::new();
    for (t, snap) in g.snapshots().iter().enumerate() {
        if spec.attempt_policy == AttemptPolicy::PerSnapshot {
            attempted.clear();
        }
        let mut frontier: Vec<NodeId> = (0..g.n_global()).filter(|&v| influenced[v] && snap.contains(v)).collect();
        let mut hops = 0;
        while !frontier.is_empty() && spec.hop_cap.is_none_or(|c| hops < c) {
            let mut next = Vec::new();
            for &u in &frontier {
                for e in snap.out_edges(u) {
                    if influenced[e.dst] || !attempted.insert((u, e.dst)) {
                        continue;
                    }
                    if fires(t, u, e.dst, e.weight) {
                        influenced[e.dst] = true;
                        next.push(e.dst);
                    }
                }
            }
            frontier = next;
            hops += 1;
        }
        record(t, &influenced);
    }
}

/// IC (either policy) and once-ever TR: one uniform per attempt key.
fn exact_uniform_coins(g: &DynamicGraph, spec: &DiffusionModelSpec, seeds: &[NodeId]) -> Result<SusceptibilityTable> {
    let once = spec.attempt_policy == AttemptPolicy::OnceEver;
    // attempt key -> every weight the key can be tried with
    let mut cuts: BTreeMap<(usize, NodeId, NodeId), Vec<f64>> = BTreeMap::new();
    for (t, snap) in g.snapshots().iter().enumerate() {
        for e in snap.edges() {
            let key = (if once { 0 } else { t }, e.src, e.dst);
            cuts.entry(key).or_default().push(e.weight);
        }
    }
    let keys: Vec<_> = cuts.keys().copied().collect();
    let index: HashMap<(usize, NodeId, NodeId), usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let outcomes: Vec<Vec<(f64, f64)>> = cuts.into_values().map(interval_outcomes).collect();
    let radix: Vec<usize> = outcomes.iter().map(Vec::len).collect();

    let mut acc = Accumulator::new(g);
    for_each_world(
        &radix,
        |i, o| outcomes[i][o].1,
        |world, p| {
            replay_cascade(
                g,
                spec,
                seeds,
                |t, u, v, w| {
                    let key = (if once { 0 } else { t }, u, v);
                    let i = index[&key];
                    outcomes[i][world[i]].0 < w
                },
                |t, inf| acc.add(t, inf, p),
            );
        },
    )?;
    Ok(acc.finish(seeds))
}

/// Per-snapshot TR: enumerate every node's trigger subset in every snapshot.
fn exact_tr(g: &DynamicGraph, spec: &DiffusionModelSpec, seeds: &[NodeId]) -> Result<SusceptibilityTable> {
    struct TriggerVar {
        t: usize,
        v: NodeId,
        uncertain: Vec<(NodeId, f64)>,
    }
    let mut vars = Vec::new();
    // always-in members per (t, v)
    let mut certain: HashSet<(usize, NodeId, NodeId)> = HashSet::new();
    for (t, snap) in g.snapshots().iter().enumerate() {
        for &v in snap.nodes() {
            let mut uncertain = Vec::new();
            for e in snap.in_edges(v) {
                if e.weight >= 1.0 {
                    certain.insert((t, e.src, v));
                } else if e.weight > 0.0 {
                    uncertain.push((e.src, e.weight));
                }
            }
            if !uncertain.is_empty() {
                vars.push(TriggerVar { t, v, uncertain });
            }
        }
    }
    let radix: Vec<usize> = vars.iter().map(|var| 1usize << var.uncertain.len()).collect();
    if radix.iter().any(|&r| r as u64 > MAX_EXACT_OUTCOMES) {
        return Err(Error::Capacity("in-degree too large for trigger-set enumeration".into()));
    }
    let lookup: HashMap<(usize, NodeId), usize> = vars.iter().enumerate().map(|(i, var)| ((var.t, var.v), i)).collect();
    let subset_prob = |i: usize, mask: usize| -> f64 {
        vars[i]
            .uncertain
            .iter()
            .enumerate()
            .map(|(b, &(_, w))| if mask >> b & 1 == 1 { w } else { 1.0 - w })
            .product()
    };

    let mut acc = Accumulator::new(g);
    for_each_world(&radix, subset_prob, |world, p| {
        let in_trigger = |t: usize, u: NodeId, v: NodeId| -> bool {
            if certain.contains(&(t, u, v)) {
                return true;
            }
            lookup.get(&(t, v)).is_some_and(|&i| {
                vars[i]
                    .uncertain
                    .iter()
                    .position(|&(src, _)| src == u)
                    .is_some_and(|b| world[i] >> b & 1 == 1)
            })
        };
        // trigger semantics: v joins when a node influenced in the previous
        // hop is in T_v, i.e. breadth-first reach over reversed trigger links
        let mut influenced = vec![false; g.n_global()];
        for &s in seeds {
            influenced[s] = true;
        }
        for (t, snap) in g.snapshots().iter().enumerate() {
            let mut frontier: Vec<NodeId> = snap.nodes().iter().copied().filter(|&v| influenced[v]).collect();
            let mut hops = 0;
            while !frontier.is_empty() && spec.hop_cap.is_none_or(|c| hops < c) {
                let next: Vec<NodeId> = snap
                    .nodes()
                    .iter()
                    .copied()
                    .filter(|&v| !influenced[v] && frontier.iter().any(|&u| snap.contains_edge(u, v) && in_trigger(t, u, v)))
                    .collect();
                for &v in &next {
                    influenced[v] = true;
                }
                frontier = next;
                hops += 1;
            }
            acc.add(t, &influenced, p);
        }
    })?;
    Ok(acc.finish(seeds))
}

fn exact_lt(g: &DynamicGraph, spec: &DiffusionModelSpec, seeds: &[NodeId]) -> Result<SusceptibilityTable> {
    if g.n_global() > MAX_LT_EXACT_NODES {
        return Err(Error::Capacity(format!(
            "exact LT supports at most {MAX_LT_EXACT_NODES} nodes, graph has {}",
            g.n_global()
        )));
    }
    let seed_set: HashSet<NodeId> = seeds.iter().copied().collect();
    let mut thresholded = Vec::new();
    let mut outcomes = Vec::new();
    for v in 0..g.n_global() {
        if seed_set.contains(&v) {
            continue;
        }
        let mut cuts = Vec::new();
        for snap in g.snapshots() {
            let w: Vec<f64> = snap.in_edges(v).map(|e| e.weight).collect();
            for mask in 0..(1usize << w.len()) {
                cuts.push((0..w.len()).filter(|b| mask >> b & 1 == 1).map(|b| w[b]).sum());
            }
        }
        if cuts.len() > 1 {
            thresholded.push(v);
            outcomes.push(interval_outcomes(cuts));
        }
    }
    let radix: Vec<usize> = outcomes.iter().map(Vec::len).collect();
    let mut acc = Accumulator::new(g);
    for_each_world(
        &radix,
        |i, o| outcomes[i][o].1,
        |world, p| {
            let mut theta = vec![f64::INFINITY; g.n_global()];
            for (i, &v) in thresholded.iter().enumerate() {
                theta[v] = outcomes[i][world[i]].0;
            }
            let mut influenced = vec![false; g.n_global()];
            for &s in seeds {
                influenced[s] = true;
            }
            for (t, snap) in g.snapshots().iter().enumerate() {
                let mut hops = 0;
                loop {
                    if spec.hop_cap.is_some_and(|c| hops >= c) {
                        break;
                    }
                    let next: Vec<NodeId> = snap
                        .nodes()
                        .iter()
                        .copied()
                        .filter(|&v| {
                            let active: Vec<f64> = snap.in_edges(v).filter(|e| influenced[e.src]).map(|e| e.weight).collect();
                            !influenced[v] && !active.is_empty() && active.iter().sum::<f64>() >= theta[v]
                        })
                        .collect();
                    if next.is_empty() {
                        break;
                    }
                    for &v in &next {
                        influenced[v] = true;
                    }
                    hops += 1;
                }
                acc.add(t, &influenced, p);
            }
        },
    )?;
    Ok(acc.finish(seeds))
}
