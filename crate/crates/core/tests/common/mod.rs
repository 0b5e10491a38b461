#![allow(dead_code)]

use dysuse_core::numerics::{ParamSet, Tape, Tensor, Var};

/// Relative error with an absolute floor so that two near-zero gradients do
/// not blow up the ratio.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares backward-pass gradients against central differences for every
/// scalar in `params`. `f` records a scalar loss given the bound parameters.
/// Returns the worst relative error and where it happened.
pub fn grad_check(params: &ParamSet, h: f64, floor: f64, f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> (f64, String) {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).expect("scalar loss");

    let eval = |p: &ParamSet| -> f64 {
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let loss = f(&mut tape, &vars);
        tape.value(loss).item()
    };

    let mut worst = (0.0, String::new());
    let mut work = params.clone();
    for id in params.ids() {
        let shape = params.get(id).shape();
        let analytic = grads.get_or_zeros(vars[id.index()], shape);
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + h;
            let up = eval(&work);
            work.get_mut(id).data_mut()[k] = orig - h;
            let down = eval(&work);
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let e = rel_err(analytic.data()[k], numeric, floor);
            if e > worst.0 {
                worst = (
                    e,
                    format!("{}[{k}]: analytic {} numeric {}", params.name(id), analytic.data()[k], numeric),
                );
            }
        }
    }
    worst
}

/// Finds a parameter whose `±h` stencil crosses a kink of the loss, by
/// comparing central differences at `h` and `h / 2`. Away from kinks the two
/// agree to rounding level; across one they differ by a fraction of the
/// derivative jump.
pub fn stencil_kink(params: &ParamSet, h: f64, f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> Option<String> {
    let eval = |p: &ParamSet| -> f64 {
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let loss = f(&mut tape, &vars);
        tape.value(loss).item()
    };
    let mut work = params.clone();
    for id in params.ids() {
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            let mut central = |step: f64| {
                work.get_mut(id).data_mut()[k] = orig + step;
                let up = eval(&work);
                work.get_mut(id).data_mut()[k] = orig - step;
                let down = eval(&work);
                work.get_mut(id).data_mut()[k] = orig;
                (up - down) / (2.0 * step)
            };
            let (wide, narrow) = (central(h), central(h / 2.0));
            if (wide - narrow).abs() > 2e-9 {
                return Some(format!("{}[{k}]: {wide} vs {narrow}", params.name(id)));
            }
        }
    }
    None
}

/// Largest absolute backward-pass gradient over all parameters.
pub fn max_abs_grad(params: &ParamSet, f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).expect("scalar loss");
    params
        .ids()
        .flat_map(|id| grads.get_or_zeros(vars[id.index()], params.get(id).shape()).data().to_vec())
        .fold(0.0, |m: f64, g| m.max(g.abs()))
}

/// Deterministic pseudo-random values in `[lo, hi)` for test fixtures.
pub fn uniform_vec(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
    Tensor::new(rows, cols, uniform_vec(seed, rows * cols, -1.0, 1.0)).unwrap()
}

/// Random dynamic graph on `n` ids with up to `max_edges` directed edges per
/// snapshot, each node present with probability 0.8, weights `1 / d_in`.
pub fn random_graph(seed: u64, n: usize, t: usize, max_edges: usize) -> dysuse_core::DynamicGraph {
    use dysuse_core::dyngraph::assign_weights;
    use dysuse_core::Edge;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lists = (0..t)
        .map(|_| {
            let mut nodes: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.8)).collect();
            if nodes.len() < 2 {
                nodes = vec![0, 1];
            }
            let mut edges: Vec<Edge> = Vec::new();
            for _ in 0..rng.gen_range(0..=max_edges) {
                let src = nodes[rng.gen_range(0..nodes.len())];
                let dst = nodes[rng.gen_range(0..nodes.len())];
                if src != dst && !edges.iter().any(|e| e.src == src && e.dst == dst) {
                    edges.push(Edge { src, dst, weight: 1.0 });
                }
            }
            // keep the universe at exactly n ids
            if t > 0 && !nodes.contains(&(n - 1)) {
                nodes.push(n - 1);
            }
            nodes.sort_unstable();
            (nodes, edges)
        })
        .collect();
    assign_weights(&dysuse_core::DynamicGraph::from_lists(lists).unwrap())
}
