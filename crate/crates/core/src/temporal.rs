//! Coupling across snapshots: the progressive hand-off of structural outputs
//! and masked self-attention over each node's score sequence.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{mask_from, ParamId, ParamSet, Tape, Tensor, Var};
use crate::structural::SeedMask;

/// Which keys a query timestamp may attend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskOrientation {
    /// Query `i` sees keys `j ≤ i`.
    Causal,
    /// Query `i` sees keys `j ≥ i`; the last timestamp sees only itself.
    Anticausal,
}

impl MaskOrientation {
    /// `T × T` additive mask.
    pub fn mask(self, t: usize) -> Tensor {
        match self {
            MaskOrientation::Causal => mask_from(|i, j| j <= i, t),
            MaskOrientation::Anticausal => mask_from(|i, j| i <= j, t),
        }
    }
}

impl fmt::Display for MaskOrientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskOrientation::Causal => "causal",
            MaskOrientation::Anticausal => "anticausal",
        })
    }
}

impl FromStr for MaskOrientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(MaskOrientation::Causal),
            "anticausal" => Ok(MaskOrientation::Anticausal),
            _ => Err(Error::invalid(format!("unknown mask orientation `{s}` (causal, anticausal)"))),
        }
    }
}

/// `x̄ = x_prev` for nodes present in the previous snapshot, `x̃` otherwise;
/// seeds are re-clamped to 1. With `prev = None` (first snapshot) the
/// initial features are returned unchanged.
pub fn progressive_update(
    tape: &mut Tape,
    x_init: Var,
    prev: Option<(Var, &[bool])>,
    seeds: &SeedMask,
) -> Result<Var> {
    let Some((prev_x, prev_present)) = prev else {
        return Ok(x_init);
    };
    let keep = Tensor::col(prev_present.iter().map(|&p| f64::from(u8::from(p))).collect());
    let fresh = Tensor::col(keep.data().iter().map(|k| 1.0 - k).collect());
    let keep = tape.constant(keep);
    let fresh = tape.constant(fresh);
    let carried = tape.mul(keep, prev_x)?;
    let initial = tape.mul(fresh, x_init)?;
    let mixed = tape.add(carried, initial)?;
    seeds.clamp(tape, mixed)
}

/// Learned positions plus stacked single-head attention with 1×1
/// projections.
#[derive(Debug, Clone)]
pub struct Attention {
    pub n_steps: usize,
    pub orientation: MaskOrientation,
    pos: ParamId,
    layers: Vec<[ParamId; 3]>,
    mask: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `N × T` output sequence.
    pub z: Var,
    /// Attention weights per layer, `N × T·T` (row-major `T × T` per node).
    pub weights: Vec<Var>,
}

impl Attention {
    pub fn register(params: &mut ParamSet, n_steps: usize, n_layers: usize, orientation: MaskOrientation) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("attention needs at least one timestamp"));
        }
        let pos = params.insert("temporal/pos", Tensor::zeros(1, n_steps))?;
        let layers = (0..n_layers)
            .map(|k| {
                let p = |n: &str| params_name(k, n);
                Ok([
                    params.insert(p("wq"), Tensor::scalar(1.0))?,
                    params.insert(p("wk"), Tensor::scalar(1.0))?,
                    params.insert(p("wv"), Tensor::scalar(1.0))?,
                ])
            })
            .collect::<Result<_>>()?;
        Ok(Attention {
            n_steps,
            orientation,
            pos,
            layers,
            mask: orientation.mask(n_steps),
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Adds positions to `x` (`N × T`) and applies every attention layer.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<AttentionOutput> {
        let (n, t) = tape.value(x).shape();
        if t != self.n_steps {
            return Err(Error::invalid(format!("attention built for {} timestamps, got {t}", self.n_steps)));
        }
        let mut h = tape.add_row(x, params[self.pos.index()])?;
        let mut weights = Vec::with_capacity(self.layers.len());
        for [wq, wk, wv] in &self.layers {
            let q = tape.scale(h, params[wq.index()])?;
            let k = tape.scale(h, params[wk.index()])?;
            let v = tape.scale(h, params[wv.index()])?;
            // F = 1, so the 1/sqrt(F) scale is the identity
            let scores = tape.outer_rows(q, k)?;
            let flat = tape.reshape(scores, n * t, t)?;
            let beta = tape.masked_softmax(flat, &self.mask)?;
            let beta = tape.reshape(beta, n, t * t)?;
            h = tape.batched_matvec(beta, v)?;
            weights.push(beta);
        }
        Ok(AttentionOutput { z: h, weights })
    }
}

fn params_name(layer: usize, name: &str) -> String {
    format!("temporal/a{layer}/{name}")
}
