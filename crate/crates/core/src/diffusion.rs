//! Stochastic diffusion (independent cascade, linear threshold, triggering)
//! inside one snapshot and carried across a snapshot sequence.
//!
//! Influence is persistent: once a node is influenced it stays influenced for
//! the rest of the simulation, even through snapshots where it is absent. An
//! absent node neither sends nor receives influence.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::dyngraph::{DynamicGraph, NodeId, Snapshot};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffusionKind {
    Ic,
    Lt,
    Tr,
}

/// Scope of an IC attempt or a TR trigger decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttemptPolicy {
    /// An influenced node may try each out-edge once per snapshot.
    PerSnapshot,
    /// Each `(src, dst)` pair is tried at most once per simulation.
    OnceEver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiffusionModelSpec {
    pub kind: DiffusionKind,
    pub hop_cap: Option<usize>,
    pub attempt_policy: AttemptPolicy,
}

impl DiffusionModelSpec {
    pub fn new(kind: DiffusionKind, hop_cap: Option<usize>, attempt_policy: AttemptPolicy) -> Result<Self> {
        if hop_cap == Some(0) {
            return Err(Error::invalid("hop cap must be at least 1"));
        }
        Ok(DiffusionModelSpec {
            kind,
            hop_cap,
            attempt_policy,
        })
    }

    /// Uncapped, per-snapshot attempts.
    pub fn of(kind: DiffusionKind) -> Self {
        DiffusionModelSpec {
            kind,
            hop_cap: None,
            attempt_policy: AttemptPolicy::PerSnapshot,
        }
    }
}

impl fmt::Display for DiffusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffusionKind::Ic => "ic",
            DiffusionKind::Lt => "lt",
            DiffusionKind::Tr => "tr",
        })
    }
}

impl FromStr for DiffusionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ic" => Ok(DiffusionKind::Ic),
            "lt" => Ok(DiffusionKind::Lt),
            "tr" => Ok(DiffusionKind::Tr),
            _ => Err(Error::invalid(format!("unknown diffusion model `{s}` (ic, lt, tr)"))),
        }
    }
}

impl fmt::Display for AttemptPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttemptPolicy::PerSnapshot => "per-snapshot",
            AttemptPolicy::OnceEver => "once-ever",
        })
    }
}

impl FromStr for AttemptPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-snapshot" => Ok(AttemptPolicy::PerSnapshot),
            "once-ever" => Ok(AttemptPolicy::OnceEver),
            _ => Err(Error::invalid(format!(
                "unknown attempt policy `{s}` (per-snapshot, once-ever)"
            ))),
        }
    }
}

impl fmt::Display for DiffusionModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cap = self.hop_cap.map_or_else(|| "none".to_string(), |c| c.to_string());
        write!(f, "{} hop_cap={} attempts={}", self.kind, cap, self.attempt_policy)
    }
}

/// Per-simulation diffusion state.
#[derive(Debug, Clone)]
pub struct DiffusionState {
    influenced: Vec<bool>,
    influenced_list: Vec<NodeId>,
    lt_thresholds: Vec<f64>,
    /// Lazily drawn trigger memberships: `tr_triggers[v]` holds `(u, in T_v)`.
    tr_triggers: Vec<Vec<(NodeId, bool)>>,
    tr_touched: Vec<NodeId>,
    attempted: HashSet<(NodeId, NodeId)>,
}

impl DiffusionState {
    pub fn is_influenced(&self, v: NodeId) -> bool {
        self.influenced[v]
    }

    /// Influenced nodes in activation order.
    pub fn influenced(&self) -> &[NodeId] {
        &self.influenced_list
    }

    pub fn influenced_sorted(&self) -> Vec<NodeId> {
        let mut v = self.influenced_list.clone();
        v.sort_unstable();
        v
    }

    pub fn lt_thresholds(&self) -> &[f64] {
        &self.lt_thresholds
    }

    /// Overrides LT thresholds, mostly for tests and exact enumeration.
    pub fn set_lt_thresholds(&mut self, thresholds: Vec<f64>) -> Result<()> {
        if thresholds.len() != self.influenced.len() {
            return Err(Error::invalid("threshold vector length differs from node count"));
        }
        self.lt_thresholds = thresholds;
        Ok(())
    }

    /// Fixes the trigger set of `v` for the current scope.
    pub fn set_trigger_set(&mut self, v: NodeId, members: &[NodeId], snap: &Snapshot) {
        self.tr_triggers[v] = snap
            .in_edges(v)
            .map(|e| (e.src, members.contains(&e.src)))
            .collect();
        self.tr_triggers[v].sort_unstable();
        self.tr_touched.push(v);
    }

    fn mark(&mut self, v: NodeId) -> bool {
        if self.influenced[v] {
            return false;
        }
        self.influenced[v] = true;
        self.influenced_list.push(v);
        true
    }

    fn reset_scope(&mut self) {
        self.attempted.clear();
        for v in self.tr_touched.drain(..) {
            self.tr_triggers[v].clear();
        }
    }

    fn trigger_member(&mut self, u: NodeId, v: NodeId, weight: f64, rng: &mut StreamRng) -> bool {
        let list = &mut self.tr_triggers[v];
        match list.binary_search_by(|(w, _)| w.cmp(&u)) {
            Ok(i) => list[i].1,
            Err(i) => {
                if list.is_empty() {
                    self.tr_touched.push(v);
                }
                let member = rng.gen::<f64>() < weight;
                list.insert(i, (u, member));
                member
            }
        }
    }
}

/// Fresh state with exactly `seeds` influenced. LT thresholds are drawn
/// i.i.d. uniform on `[0, 1)` once for the whole simulation.
pub fn init_state(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    rng: &mut StreamRng,
) -> Result<DiffusionState> {
    let n = g.n_global();
    if let Some(&bad) = seeds.iter().find(|&&s| s >= n) {
        return Err(Error::invalid(format!("seed {bad} outside node universe of {n}")));
    }
    let lt_thresholds = match spec.kind {
        DiffusionKind::Lt => (0..n).map(|_| rng.gen::<f64>()).collect(),
        _ => Vec::new(),
    };
    let tr_triggers = match spec.kind {
        DiffusionKind::Tr => vec![Vec::new(); n],
        _ => Vec::new(),
    };
    let mut state = DiffusionState {
        influenced: vec![false; n],
        influenced_list: Vec::with_capacity(seeds.len()),
        lt_thresholds,
        tr_triggers,
        tr_touched: Vec::new(),
        attempted: HashSet::new(),
    };
    for &s in seeds {
        state.mark(s);
    }
    Ok(state)
}

/// One IC hop: every frontier node tries each out-edge to an uninfluenced
/// node, succeeding with the edge weight.
pub fn step_ic(
    snap: &Snapshot,
    state: &mut DiffusionState,
    frontier: &[NodeId],
    policy: AttemptPolicy,
    rng: &mut StreamRng,
) -> Vec<NodeId> {
    let mut newly = Vec::new();
    for &u in frontier {
        if !snap.contains(u) {
            continue;
        }
        for e in snap.out_edges(u) {
            if state.influenced[e.dst] {
                continue;
            }
            if policy == AttemptPolicy::OnceEver && !state.attempted.insert((u, e.dst)) {
                continue;
            }
            if rng.gen::<f64>() < e.weight && state.mark(e.dst) {
                newly.push(e.dst);
            }
        }
    }
    newly
}

/// One synchronous LT round: nodes whose influenced in-weight reaches their
/// threshold, measured against the state at the start of the round.
pub fn step_lt(snap: &Snapshot, state: &mut DiffusionState, frontier: &[NodeId]) -> Vec<NodeId> {
    let mut candidates: Vec<NodeId> = frontier
        .iter()
        .filter(|&&u| snap.contains(u))
        .flat_map(|&u| snap.out_edges(u).iter().map(|e| e.dst))
        .filter(|&v| !state.influenced[v])
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    let newly: Vec<NodeId> = candidates
        .into_iter()
        .filter(|&v| {
            let mass: f64 = snap
                .in_edges(v)
                .filter(|e| state.influenced[e.src])
                .map(|e| e.weight)
                .sum();
            mass >= state.lt_thresholds[v]
        })
        .collect();
    for &v in &newly {
        state.mark(v);
    }
    newly
}

/// One TR hop: `v` activates when a frontier in-neighbour belongs to its
/// trigger set. Membership of each in-neighbour is drawn on first use with
/// probability equal to the edge weight.
pub fn step_tr(snap: &Snapshot, state: &mut DiffusionState, frontier: &[NodeId], rng: &mut StreamRng) -> Vec<NodeId> {
    let mut newly = Vec::new();
    for &u in frontier {
        if !snap.contains(u) {
            continue;
        }
        for e in snap.out_edges(u) {
            if state.influenced[e.dst] {
                continue;
            }
            if state.trigger_member(u, e.dst, e.weight, rng) && state.mark(e.dst) {
                newly.push(e.dst);
            }
        }
    }
    newly
}

/// Diffuses inside one snapshot until quiescence or `hop_cap` hops. The first
/// frontier is every influenced node present in the snapshot.
pub fn run_snapshot(snap: &Snapshot, state: &mut DiffusionState, spec: &DiffusionModelSpec, rng: &mut StreamRng) {
    if spec.attempt_policy == AttemptPolicy::PerSnapshot {
        state.reset_scope();
    }
    let mut frontier: Vec<NodeId> = state
        .influenced_list
        .iter()
        .copied()
        .filter(|&v| snap.contains(v))
        .collect();
    frontier.sort_unstable();
    let mut hops = 0;
    while !frontier.is_empty() && spec.hop_cap.is_none_or(|cap| hops < cap) {
        frontier = match spec.kind {
            DiffusionKind::Ic => step_ic(snap, state, &frontier, spec.attempt_policy, rng),
            DiffusionKind::Lt => step_lt(snap, state, &frontier),
            DiffusionKind::Tr => step_tr(snap, state, &frontier, rng),
        };
        hops += 1;
    }
}

/// Runs the whole snapshot sequence, calling `observe(t, state)` after each
/// snapshot.
pub fn simulate(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    rng: &mut StreamRng,
    mut observe: impl FnMut(usize, &DiffusionState),
) -> Result<()> {
    let mut state = init_state(g, spec, seeds, rng)?;
    for (t, snap) in g.snapshots().iter().enumerate() {
        run_snapshot(snap, &mut state, spec, rng);
        observe(t, &state);
    }
    Ok(())
}

/// Influenced set (ascending) after each snapshot.
pub fn run_dynamic(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    rng: &mut StreamRng,
) -> Result<Vec<Vec<NodeId>>> {
    let mut out = Vec::with_capacity(g.n_snapshots());
    simulate(g, spec, seeds, rng, |_, s| out.push(s.influenced_sorted()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::Edge;
    use crate::rng::stream;

    fn edge(src: NodeId, dst: NodeId, weight: f64) -> Edge {
        Edge { src, dst, weight }
    }

    fn graph(snaps: Vec<(Vec<NodeId>, Vec<Edge>)>) -> DynamicGraph {
        DynamicGraph::from_lists(snaps).unwrap()
    }

    fn frequency(g: &DynamicGraph, spec: DiffusionModelSpec, seeds: &[NodeId], node: NodeId, sims: u64) -> f64 {
        let hits = (0..sims)
            .filter(|&i| {
                let traj = run_dynamic(g, &spec, seeds, &mut stream(2024, i)).unwrap();
                traj.last().unwrap().contains(&node)
            })
            .count();
        hits as f64 / sims as f64
    }

    #[test]
    fn init_marks_only_seeds() {
        let g = graph(vec![(vec![0, 1, 2], vec![edge(0, 1, 1.0)])]);
        let s = init_state(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[0], &mut stream(0, 0)).unwrap();
        assert_eq!(s.influenced_sorted(), vec![0]);
        assert!(init_state(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[5], &mut stream(0, 0)).is_err());
    }

    #[test]
    fn empty_seed_set_stays_empty() {
        let g = graph(vec![(vec![0, 1], vec![edge(0, 1, 1.0)])]);
        for kind in [DiffusionKind::Ic, DiffusionKind::Lt, DiffusionKind::Tr] {
            let traj = run_dynamic(&g, &DiffusionModelSpec::of(kind), &[], &mut stream(1, 0)).unwrap();
            assert!(traj.iter().all(|s| s.is_empty()));
        }
    }

    #[test]
    fn lt_thresholds_are_reproducible() {
        let g = graph(vec![(vec![0, 1, 2], vec![])]);
        let spec = DiffusionModelSpec::of(DiffusionKind::Lt);
        let a = init_state(&g, &spec, &[0], &mut stream(9, 4)).unwrap();
        let b = init_state(&g, &spec, &[0], &mut stream(9, 4)).unwrap();
        assert_eq!(a.lt_thresholds(), b.lt_thresholds());
        assert!(a.lt_thresholds().iter().all(|t| (0.0..1.0).contains(t)));
    }

    #[test]
    fn ic_certain_and_impossible_edges() {
        let g = graph(vec![(vec![0, 1, 2], vec![edge(0, 1, 1.0), edge(0, 2, 0.0)])]);
        let spec = DiffusionModelSpec::of(DiffusionKind::Ic);
        for i in 0..200 {
            let mut rng = stream(3, i);
            let mut st = init_state(&g, &spec, &[0], &mut rng).unwrap();
            let newly = step_ic(g.snapshot(0), &mut st, &[0], AttemptPolicy::PerSnapshot, &mut rng);
            assert_eq!(newly, vec![1]);
        }
    }

    #[test]
    fn ic_half_edge_frequency() {
        let g = graph(vec![(vec![0, 1], vec![edge(0, 1, 0.5)])]);
        let f = frequency(&g, DiffusionModelSpec::of(DiffusionKind::Ic), &[0], 1, 20_000);
        assert!((0.48..=0.52).contains(&f), "{f}");
    }

    #[test]
    fn lt_threshold_comparisons() {
        let snap_nodes = vec![0, 1, 2];
        let g = graph(vec![(snap_nodes, vec![edge(0, 2, 0.5), edge(1, 2, 0.5)])]);
        let spec = DiffusionModelSpec::of(DiffusionKind::Lt);
        let mut st = init_state(&g, &spec, &[0], &mut stream(0, 0)).unwrap();
        st.set_lt_thresholds(vec![0.9, 0.9, 0.4]).unwrap();
        assert_eq!(step_lt(g.snapshot(0), &mut st, &[0]), vec![2]);

        let mut st = init_state(&g, &spec, &[0], &mut stream(0, 0)).unwrap();
        st.set_lt_thresholds(vec![0.9, 0.9, 0.6]).unwrap();
        assert!(step_lt(g.snapshot(0), &mut st, &[0]).is_empty());
        let mut both = init_state(&g, &spec, &[0, 1], &mut stream(0, 0)).unwrap();
        both.set_lt_thresholds(vec![0.9, 0.9, 0.6]).unwrap();
        assert_eq!(step_lt(g.snapshot(0), &mut both, &[0, 1]), vec![2]);
    }

    #[test]
    fn lt_without_influenced_neighbours_is_inert() {
        let g = graph(vec![(vec![0, 1, 2], vec![edge(1, 2, 1.0)])]);
        let spec = DiffusionModelSpec::of(DiffusionKind::Lt);
        let mut st = init_state(&g, &spec, &[0], &mut stream(0, 0)).unwrap();
        st.set_lt_thresholds(vec![0.0; 3]).unwrap();
        assert!(step_lt(g.snapshot(0), &mut st, &[0]).is_empty());
    }

    #[test]
    fn tr_uses_trigger_sets() {
        let g = graph(vec![(vec![0, 1, 2], vec![edge(0, 1, 0.5), edge(0, 2, 0.5)])]);
        let spec = DiffusionModelSpec::of(DiffusionKind::Tr);
        let mut rng = stream(0, 0);
        let mut st = init_state(&g, &spec, &[0], &mut rng).unwrap();
        st.set_trigger_set(1, &[0], g.snapshot(0));
        st.set_trigger_set(2, &[], g.snapshot(0));
        assert_eq!(step_tr(g.snapshot(0), &mut st, &[0], &mut rng), vec![1]);
    }

    #[test]
    fn tr_matches_ic_on_half_edge() {
        let g = graph(vec![(vec![0, 1], vec![edge(0, 1, 0.5)])]);
        let f = frequency(&g, DiffusionModelSpec::of(DiffusionKind::Tr), &[0], 1, 20_000);
        assert!((0.48..=0.52).contains(&f), "{f}");
    }

    #[test]
    fn hop_cap_limits_chain() {
        let g = graph(vec![(vec![0, 1, 2], vec![edge(0, 1, 1.0), edge(1, 2, 1.0)])]);
        for kind in [DiffusionKind::Ic, DiffusionKind::Tr, DiffusionKind::Lt] {
            let capped = DiffusionModelSpec::new(kind, Some(1), AttemptPolicy::PerSnapshot).unwrap();
            let traj = run_dynamic(&g, &capped, &[0], &mut stream(0, 0)).unwrap();
            assert_eq!(traj[0], vec![0, 1], "{kind}");
            let free = DiffusionModelSpec::of(kind);
            let traj = run_dynamic(&g, &free, &[0], &mut stream(0, 0)).unwrap();
            assert_eq!(traj[0], vec![0, 1, 2], "{kind}");
        }
        assert!(DiffusionModelSpec::new(DiffusionKind::Ic, Some(0), AttemptPolicy::PerSnapshot).is_err());
    }

    #[test]
    fn unreachable_node_never_influenced() {
        let g = graph(vec![(vec![0, 1, 3], vec![edge(0, 1, 1.0)])]);
        let traj = run_dynamic(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[0], &mut stream(0, 0)).unwrap();
        assert!(!traj[0].contains(&3));
    }

    #[test]
    fn edge_appearing_later() {
        let g = graph(vec![(vec![0, 1], vec![]), (vec![0, 1], vec![edge(0, 1, 1.0)])]);
        let traj = run_dynamic(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[0], &mut stream(0, 0)).unwrap();
        assert_eq!(traj, vec![vec![0], vec![0, 1]]);
    }

    #[test]
    fn absent_node_keeps_state_and_resumes() {
        // b=1 influenced at t=0, absent at t=1, back at t=2 where it reaches c=2
        let g = graph(vec![
            (vec![0, 1], vec![edge(0, 1, 1.0)]),
            (vec![0, 2], vec![]),
            (vec![1, 2], vec![edge(1, 2, 1.0)]),
        ]);
        let traj = run_dynamic(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[0], &mut stream(0, 0)).unwrap();
        assert_eq!(traj[0], vec![0, 1]);
        assert_eq!(traj[1], vec![0, 1]);
        assert_eq!(traj[2], vec![0, 1, 2]);
    }

    #[test]
    fn once_ever_freezes_after_first_snapshot() {
        let snap = (vec![0, 1, 2, 3], vec![edge(0, 1, 0.5), edge(1, 2, 0.5), edge(0, 3, 0.3), edge(3, 2, 0.7)]);
        let g = graph(vec![snap.clone(), snap.clone(), snap]);
        for kind in [DiffusionKind::Ic, DiffusionKind::Tr] {
            let spec = DiffusionModelSpec::new(kind, None, AttemptPolicy::OnceEver).unwrap();
            for i in 0..300 {
                let traj = run_dynamic(&g, &spec, &[0], &mut stream(5, i)).unwrap();
                assert_eq!(traj[0], traj[2]);
            }
        }
    }

    #[test]
    fn trajectories_monotone_and_deterministic() {
        let g = graph(vec![
            (vec![0, 1, 2, 3], vec![edge(0, 1, 0.5), edge(1, 2, 0.5), edge(2, 3, 0.5)]),
            (vec![0, 1, 2, 3], vec![edge(0, 1, 0.5), edge(1, 2, 0.5), edge(2, 3, 0.5), edge(3, 0, 1.0)]),
        ]);
        for kind in [DiffusionKind::Ic, DiffusionKind::Lt, DiffusionKind::Tr] {
            let spec = DiffusionModelSpec::of(kind);
            for i in 0..100 {
                let a = run_dynamic(&g, &spec, &[0], &mut stream(8, i)).unwrap();
                let b = run_dynamic(&g, &spec, &[0], &mut stream(8, i)).unwrap();
                assert_eq!(a, b);
                assert!(a[0].contains(&0) && a[1].contains(&0));
                assert!(a[0].iter().all(|v| a[1].contains(v)));
            }
        }
    }
}
