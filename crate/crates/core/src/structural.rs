//! Per-snapshot graph networks producing one susceptibility score per node.
//!
//! Two implementations share the [`StructuralModule`] interface: a coupled
//! pair of state / influence networks ([`CoupledGnn`]) and a plain weighted
//! GCN ([`Gcn`]). Both clamp seed nodes to 1 after every layer and use the
//! same parameters for every snapshot.
//!
//! Row-vector convention: node features are rows, so a projection is `R · W`
//! with `W` of shape `h_in × h_out`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::dyngraph::{NodeId, Snapshot};
use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::rng;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Edge list of one snapshot in gather/scatter form.
#[derive(Debug, Clone)]
pub struct SnapshotInput {
    pub n: usize,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    /// `E × 1` edge weights.
    pub weight: Tensor,
    pub present: Vec<bool>,
}

impl SnapshotInput {
    pub fn new(snap: &Snapshot) -> Self {
        let edges = snap.edges();
        SnapshotInput {
            n: snap.n_global(),
            src: edges.iter().map(|e| e.src).collect(),
            dst: edges.iter().map(|e| e.dst).collect(),
            weight: Tensor::col(edges.iter().map(|e| e.weight).collect()),
            present: snap.presence().to_vec(),
        }
    }
}

/// Seed indicator `s` and its complement, recorded once per forward pass.
#[derive(Debug, Clone, Copy)]
pub struct SeedMask {
    pub seed: Var,
    pub free: Var,
}

impl SeedMask {
    pub fn new(tape: &mut Tape, n: usize, seeds: &[NodeId]) -> Result<Self> {
        let mut s = vec![0.0; n];
        for &v in seeds {
            *s.get_mut(v).ok_or_else(|| Error::invalid(format!("seed {v} outside {n} nodes")))? = 1.0;
        }
        let free = Tensor::col(s.iter().map(|x| 1.0 - x).collect());
        Ok(SeedMask {
            seed: tape.constant(Tensor::col(s)),
            free: tape.constant(free),
        })
    }

    /// `s + (1 - s) ⊙ x`: seeds become exactly 1, others keep `x`.
    pub fn clamp(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let kept = tape.mul(self.free, x)?;
        tape.add(kept, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralKind {
    CoupledGnn,
    Gcn,
}

impl fmt::Display for StructuralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructuralKind::CoupledGnn => "coupled",
            StructuralKind::Gcn => "gcn",
        })
    }
}

impl FromStr for StructuralKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" | "coupledgnn" => Ok(StructuralKind::CoupledGnn),
            "gcn" => Ok(StructuralKind::Gcn),
            _ => Err(Error::invalid(format!("unknown structural module `{s}` (coupled, gcn)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralConfig {
    pub kind: StructuralKind,
    pub layers: usize,
    /// Influence-representation width.
    pub hidden: usize,
    /// Hidden width of the state-gate MLP.
    pub gate_width: usize,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig {
            kind: StructuralKind::CoupledGnn,
            layers: 3,
            hidden: 8,
            gate_width: 8,
        }
    }
}

/// Output of one structural pass on one snapshot.
#[derive(Debug, Clone)]
pub struct StructuralOutput {
    /// `N × 1` scores after the last layer.
    pub x: Var,
    /// `N × 1` scores after each layer (the last entry equals `x`).
    pub layers: Vec<Var>,
}

pub trait StructuralModule: fmt::Debug + Send + Sync {
    fn kind(&self) -> StructuralKind;

    /// Runs every layer on one snapshot. `params` is the bound parameter
    /// list of the owning [`ParamSet`]; `r0` is the `N × h` initial influence
    /// representation (ignored by modules that have none).
    fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        snap: &SnapshotInput,
        x0: Var,
        r0: Var,
        seeds: &SeedMask,
    ) -> Result<StructuralOutput>;
}

/// Builds and registers the configured module under `structural/`.
pub fn build_structural(cfg: &StructuralConfig, params: &mut ParamSet, init_seed: u64) -> Result<Box<dyn StructuralModule>> {
    if cfg.layers == 0 || cfg.hidden == 0 || cfg.gate_width == 0 {
        return Err(Error::invalid("structural layers and widths must be at least 1"));
    }
    Ok(match cfg.kind {
        StructuralKind::CoupledGnn => Box::new(CoupledGnn::register(cfg, params, init_seed)?),
        StructuralKind::Gcn => Box::new(Gcn::register(cfg, params)?),
    })
}

/// Initial influence representation: row `v` is drawn from a stream keyed by
/// `(seed, v)`, uniform in `(-0.5/h, 0.5/h)`. Independent of graph size.
pub fn initial_influence(n: usize, hidden: usize, seed: u64) -> Tensor {
    let key = rng::derive_seed(seed, "influence-rep");
    let bound = 0.5 / hidden as f64;
    let mut data = Vec::with_capacity(n * hidden);
    for v in 0..n {
        let mut r = rng::stream(key, v as u64);
        data.extend((0..hidden).map(|_| r.gen_range(-bound..bound)));
    }
    Tensor::new(n, hidden, data).expect("n x hidden")
}

fn glorot(rows: usize, cols: usize, r: &mut rng::StreamRng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::new(rows, cols, (0..rows * cols).map(|_| r.gen_range(-a..a)).collect()).expect("shape")
}

/// Per-edge gate `β_src · (W r_u) + β_dst · (W r_v)` from the projected
/// representation `wr = R W`. Returns `E × 1`.
pub fn influ_gate(
    tape: &mut Tape,
    wr: Var,
    beta_src: Var,
    beta_dst: Var,
    src: &Arc<[usize]>,
    dst: &Arc<[usize]>,
) -> Result<Var> {
    let gu = tape.matmul(wr, beta_src)?;
    let gv = tape.matmul(wr, beta_dst)?;
    let gu = tape.gather_rows(gu, src)?;
    let gv = tape.gather_rows(gv, dst)?;
    tape.add(gu, gv)
}

/// `a_v = Σ_{(u,v)} gate_uv · x_u`; zero for nodes without in-edges.
pub fn state_aggregate(
    tape: &mut Tape,
    gate: Var,
    x: Var,
    src: &Arc<[usize]>,
    dst: &Arc<[usize]>,
    n: usize,
) -> Result<Var> {
    let xu = tape.gather_rows(x, src)?;
    let msg = tape.mul(gate, xu)?;
    tape.scatter_add_rows(msg, dst, n)
}

/// Seeds → 1, others `sigmoid(μ_x x + μ_a a)`.
pub fn state_combine(tape: &mut Tape, x: Var, a: Var, seeds: &SeedMask, mu_x: Var, mu_a: Var) -> Result<Var> {
    let px = tape.scale(x, mu_x)?;
    let pa = tape.scale(a, mu_a)?;
    let pre = tape.add(px, pa)?;
    let s = tape.sigmoid(pre);
    seeds.clamp(tape, s)
}

/// `b_v = Σ_{(u,v)} gate_u · p_uv · (W r_u)` where `state_gate` is `N × 1`.
pub fn influence_aggregate(
    tape: &mut Tape,
    state_gate: Var,
    p: Var,
    wr: Var,
    src: &Arc<[usize]>,
    dst: &Arc<[usize]>,
    n: usize,
) -> Result<Var> {
    let gu = tape.gather_rows(state_gate, src)?;
    let coeff = tape.mul(gu, p)?;
    let wru = tape.gather_rows(wr, src)?;
    let msg = tape.mul_col(wru, coeff)?;
    tape.scatter_add_rows(msg, dst, n)
}

/// `leaky(ζ_r W r + ζ_b b)`.
pub fn influence_combine(tape: &mut Tape, wr: Var, b: Var, zeta_r: Var, zeta_b: Var) -> Result<Var> {
    let pr = tape.scale(wr, zeta_r)?;
    let pb = tape.scale(b, zeta_b)?;
    let pre = tape.add(pr, pb)?;
    Ok(tape.leaky_relu(pre, LEAKY_SLOPE))
}

#[derive(Debug, Clone)]
struct CoupledLayer {
    w: ParamId,
    beta_src: ParamId,
    beta_dst: ParamId,
    mu_x: ParamId,
    mu_a: ParamId,
    zeta_r: ParamId,
    zeta_b: ParamId,
    gate: [(ParamId, ParamId); 3],
}

/// Coupled state / influence networks.
#[derive(Debug, Clone)]
pub struct CoupledGnn {
    layers: Vec<CoupledLayer>,
}

impl CoupledGnn {
    fn register(cfg: &StructuralConfig, params: &mut ParamSet, init_seed: u64) -> Result<Self> {
        let mut r = rng::stream(rng::derive_seed(init_seed, "structural"), 0);
        let (h, g) = (cfg.hidden, cfg.gate_width);
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = |name: &str| format!("structural/l{l}/{name}");
            let w = params.insert(p("w"), glorot(h, h, &mut r))?;
            let beta_src = params.insert(p("beta_src"), Tensor::zeros(h, 1))?;
            let beta_dst = params.insert(p("beta_dst"), Tensor::zeros(h, 1))?;
            let mu_x = params.insert(p("mu_x"), Tensor::scalar(1.0))?;
            let mu_a = params.insert(p("mu_a"), Tensor::scalar(1.0))?;
            let zeta_r = params.insert(p("zeta_r"), Tensor::scalar(1.0))?;
            let zeta_b = params.insert(p("zeta_b"), Tensor::scalar(1.0))?;
            let widths = [(1, g), (g, g), (g, 1)];
            let mut gate = Vec::with_capacity(3);
            for (k, &(i, o)) in widths.iter().enumerate() {
                let wk = params.insert(p(&format!("gate{k}/w")), glorot(i, o, &mut r))?;
                let bk = params.insert(p(&format!("gate{k}/b")), Tensor::zeros(1, o))?;
                gate.push((wk, bk));
            }
            layers.push(CoupledLayer {
                w,
                beta_src,
                beta_dst,
                mu_x,
                mu_a,
                zeta_r,
                zeta_b,
                gate: [gate[0], gate[1], gate[2]],
            });
        }
        Ok(CoupledGnn { layers })
    }

    fn state_gate(tape: &mut Tape, params: &[Var], layer: &CoupledLayer, x: Var) -> Result<Var> {
        let mut h = x;
        for (k, &(w, b)) in layer.gate.iter().enumerate() {
            h = tape.matmul(h, params[w.index()])?;
            h = tape.add_row(h, params[b.index()])?;
            h = if k < 2 { tape.leaky_relu(h, LEAKY_SLOPE) } else { tape.sigmoid(h) };
        }
        Ok(h)
    }
}

impl StructuralModule for CoupledGnn {
    fn kind(&self) -> StructuralKind {
        StructuralKind::CoupledGnn
    }

    fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        snap: &SnapshotInput,
        x0: Var,
        r0: Var,
        seeds: &SeedMask,
    ) -> Result<StructuralOutput> {
        let v = |id: ParamId| params[id.index()];
        let p = tape.constant(snap.weight.clone());
        let (mut x, mut r) = (x0, r0);
        let mut outs = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let wr = tape.matmul(r, v(layer.w))?;
            let gate = influ_gate(tape, wr, v(layer.beta_src), v(layer.beta_dst), &snap.src, &snap.dst)?;
            let a = state_aggregate(tape, gate, x, &snap.src, &snap.dst, snap.n)?;
            let sg = Self::state_gate(tape, params, layer, x)?;
            let b = influence_aggregate(tape, sg, p, wr, &snap.src, &snap.dst, snap.n)?;
            x = state_combine(tape, x, a, seeds, v(layer.mu_x), v(layer.mu_a))?;
            r = influence_combine(tape, wr, b, v(layer.zeta_r), v(layer.zeta_b))?;
            outs.push(x);
        }
        Ok(StructuralOutput { x, layers: outs })
    }
}

/// Weighted GCN: `h_v = Σ w_uv x_u`, `x' = sigmoid(θ1 x + θ2 h)`, seeds clamped.
#[derive(Debug, Clone)]
pub struct Gcn {
    layers: Vec<(ParamId, ParamId)>,
}

impl Gcn {
    fn register(cfg: &StructuralConfig, params: &mut ParamSet) -> Result<Self> {
        let layers = (0..cfg.layers)
            .map(|l| {
                Ok((
                    params.insert(format!("structural/l{l}/theta_self"), Tensor::scalar(1.0))?,
                    params.insert(format!("structural/l{l}/theta_nbr"), Tensor::scalar(1.0))?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Gcn { layers })
    }
}

impl StructuralModule for Gcn {
    fn kind(&self) -> StructuralKind {
        StructuralKind::Gcn
    }

    fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        snap: &SnapshotInput,
        x0: Var,
        _r0: Var,
        seeds: &SeedMask,
    ) -> Result<StructuralOutput> {
        let p = tape.constant(snap.weight.clone());
        let mut x = x0;
        let mut outs = Vec::with_capacity(self.layers.len());
        for &(t1, t2) in &self.layers {
            let h = state_aggregate(tape, p, x, &snap.src, &snap.dst, snap.n)?;
            x = state_combine(tape, x, h, seeds, params[t1.index()], params[t2.index()])?;
            outs.push(x);
        }
        Ok(StructuralOutput { x, layers: outs })
    }
}
