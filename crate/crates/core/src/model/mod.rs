//! The assembled estimator: structural pass per snapshot with progressive
//! hand-off, temporal attention, and a ReLU-1 head on the last timestamp.

mod train;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

pub use train::{train, EpochRecord, TrainConfig, TrainLog};

use crate::dyngraph::{DynamicGraph, NodeId};
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tape, Tensor, Var};
use crate::structural::{
    build_structural, initial_influence, SeedMask, SnapshotInput, StructuralConfig, StructuralModule, StructuralOutput,
};
use crate::temporal::{progressive_update, Attention, AttentionOutput, MaskOrientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub structural: StructuralConfig,
    /// Sequence length baked into the attention block.
    pub n_snapshots: usize,
    pub attention_layers: usize,
    pub mask: MaskOrientation,
    pub use_attention: bool,
    pub use_progressive: bool,
    /// Seeds parameter init and the initial influence representation.
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn new(n_snapshots: usize, init_seed: u64) -> Self {
        ModelConfig {
            structural: StructuralConfig::default(),
            n_snapshots,
            attention_layers: 1,
            mask: MaskOrientation::Causal,
            use_attention: true,
            use_progressive: true,
            init_seed,
        }
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let s = &self.structural;
        [
            ("structural", s.kind.to_string()),
            ("layers", s.layers.to_string()),
            ("hidden", s.hidden.to_string()),
            ("gate_width", s.gate_width.to_string()),
            ("n_snapshots", self.n_snapshots.to_string()),
            ("attention_layers", self.attention_layers.to_string()),
            ("mask", self.mask.to_string()),
            ("attention", self.use_attention.to_string()),
            ("progressive", self.use_progressive.to_string()),
            ("init_seed", self.init_seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, k: &str) -> Result<T> {
            kv.get(k)
                .ok_or_else(|| Error::Corrupt(format!("checkpoint config lacks `{k}`")))?
                .parse()
                .map_err(|_| Error::Corrupt(format!("bad checkpoint config value for `{k}`")))
        }
        Ok(ModelConfig {
            structural: StructuralConfig {
                kind: get(kv, "structural")?,
                layers: get(kv, "layers")?,
                hidden: get(kv, "hidden")?,
                gate_width: get(kv, "gate_width")?,
            },
            n_snapshots: get(kv, "n_snapshots")?,
            attention_layers: get(kv, "attention_layers")?,
            mask: get(kv, "mask")?,
            use_attention: get(kv, "attention")?,
            use_progressive: get(kv, "progressive")?,
            init_seed: get(kv, "init_seed")?,
        })
    }
}

/// Graph data in the form the model consumes; build once per graph.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub n: usize,
    pub snapshots: Vec<SnapshotInput>,
    pub r0: Tensor,
}

/// Every intermediate a forward pass records.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `N × 1` prediction.
    pub y: Var,
    pub structural: Vec<StructuralOutput>,
    /// `N × T` structural outputs.
    pub sequence: Var,
    pub attention: Option<AttentionOutput>,
}

#[derive(Debug)]
pub struct DySuseModel {
    config: ModelConfig,
    params: ParamSet,
    structural: Box<dyn StructuralModule>,
    attention: Attention,
}

impl Clone for DySuseModel {
    fn clone(&self) -> Self {
        let mut m = DySuseModel::new(self.config).expect("config already validated");
        m.params = self.params.clone();
        m
    }
}

/// `Σ |ŷ - y|`.
pub fn loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum())
}

impl DySuseModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.n_snapshots == 0 {
            return Err(Error::invalid("model needs at least one snapshot"));
        }
        let mut params = ParamSet::new();
        let structural = build_structural(&config.structural, &mut params, config.init_seed)?;
        let attention = Attention::register(&mut params, config.n_snapshots, config.attention_layers, config.mask)?;
        Ok(DySuseModel {
            config,
            params,
            structural,
            attention,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn prepare(&self, g: &DynamicGraph) -> Result<PreparedGraph> {
        if g.n_snapshots() != self.config.n_snapshots {
            return Err(Error::invalid(format!(
                "model expects {} snapshots, graph has {}",
                self.config.n_snapshots,
                g.n_snapshots()
            )));
        }
        Ok(PreparedGraph {
            n: g.n_global(),
            snapshots: g.snapshots().iter().map(SnapshotInput::new).collect(),
            r0: initial_influence(g.n_global(), self.config.structural.hidden, self.config.init_seed),
        })
    }

    /// Records the full forward pass on `tape` with parameters `vars`.
    pub fn record(&self, tape: &mut Tape, vars: &[Var], g: &PreparedGraph, seeds: &[NodeId]) -> Result<Trace> {
        if g.snapshots.len() != self.config.n_snapshots {
            return Err(Error::invalid(format!(
                "model expects {} snapshots, graph has {}",
                self.config.n_snapshots,
                g.snapshots.len()
            )));
        }
        let mask = SeedMask::new(tape, g.n, seeds)?;
        let x_init = mask.seed;
        let r0 = tape.constant(g.r0.clone());
        let mut outs: Vec<StructuralOutput> = Vec::with_capacity(g.snapshots.len());
        for (t, snap) in g.snapshots.iter().enumerate() {
            let x_bar = match (self.config.use_progressive, outs.last()) {
                (true, Some(prev)) => {
                    progressive_update(tape, x_init, Some((prev.x, &g.snapshots[t - 1].present)), &mask)?
                }
                _ => x_init,
            };
            outs.push(self.structural.forward(tape, vars, snap, x_bar, r0, &mask)?);
        }
        let mut sequence = outs[0].x;
        for o in &outs[1..] {
            sequence = tape.concat_cols(sequence, o.x)?;
        }
        let (last, attention) = if self.config.use_attention {
            let att = self.attention.forward(tape, vars, sequence)?;
            let t = self.config.n_snapshots;
            (tape.slice_cols(att.z, t - 1, 1)?, Some(att))
        } else {
            (outs.last().expect("nonempty").x, None)
        };
        let y = tape.relu1(last);
        Ok(Trace {
            y,
            structural: outs,
            sequence,
            attention,
        })
    }

    /// Predicted susceptibility at the last timestamp.
    pub fn predict(&self, g: &PreparedGraph, seeds: &[NodeId]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.params.bind_constant(&mut tape);
        let trace = self.record(&mut tape, &vars, g, seeds)?;
        Ok(tape.value(trace.y).data().to_vec())
    }

    /// Predictions for many seed sets, in parallel over the current pool.
    pub fn predict_many(&self, g: &PreparedGraph, seed_sets: &[Vec<NodeId>]) -> Result<Vec<Vec<f64>>> {
        seed_sets.par_iter().map(|s| self.predict(g, s)).collect()
    }

    /// L1 loss against `target` and its gradient for every parameter.
    pub fn loss_and_grads(&self, g: &PreparedGraph, seeds: &[NodeId], target: &[f64]) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape);
        let trace = self.record(&mut tape, &vars, g, seeds)?;
        let l = tape.abs_diff_sum(trace.y, target)?;
        let grads = tape.backward(l)?;
        let out = self
            .params
            .ids()
            .map(|id| grads.get_or_zeros(vars[id.index()], self.params.get(id).shape()))
            .collect();
        Ok((tape.value(l).item(), out))
    }

    pub fn to_checkpoint(&self) -> String {
        self.params.write_checkpoint(&self.config.to_kv())
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let (params, kv) = ParamSet::read_checkpoint(text)?;
        let mut model = DySuseModel::new(ModelConfig::from_kv(&kv)?)?;
        if params.len() != model.params.len() {
            return Err(Error::Corrupt(format!(
                "checkpoint has {} tensors, model needs {}",
                params.len(),
                model.params.len()
            )));
        }
        for ((na, ta), (nb, tb)) in params.iter().zip(model.params.iter()) {
            if na != nb || ta.shape() != tb.shape() {
                return Err(Error::Corrupt(format!("checkpoint tensor `{na}` does not match `{nb}`")));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}
