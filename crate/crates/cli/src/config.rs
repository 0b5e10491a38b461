//! Flat `key = value` run configuration with `graph.`, `diffusion.`,
//! `truth.`, `model.`, `train.`, `eval.` and `bench.` sections.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dysuse_core::diffusion::{AttemptPolicy, DiffusionKind, DiffusionModelSpec};
use dysuse_core::dyngraph::{Perturbation, SyntheticBa};
use dysuse_core::model::{ModelConfig, TrainConfig};
use dysuse_core::numerics::AdamConfig;
use dysuse_core::structural::StructuralConfig;

/// Every recognised key with its default; `None` means no default.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("master_seed", None),
    ("graph.source", Some("generate")),
    ("graph.generator", Some("ba")),
    ("graph.path", None),
    ("graph.directed", Some("false")),
    ("graph.n", Some("100")),
    ("graph.m", Some("3")),
    ("graph.t", Some("5")),
    ("graph.initial_fraction", Some("0.5")),
    ("graph.node_add", Some("0.05")),
    ("graph.node_del", Some("0.05")),
    ("graph.edge_add", Some("0.1")),
    ("graph.edge_del", Some("0.1")),
    ("graph.sample_fraction", Some("true")),
    ("diffusion.kind", Some("ic")),
    ("diffusion.hop_cap", Some("none")),
    ("diffusion.attempts", Some("per-snapshot")),
    ("truth.sizes", Some("5,10,15,20,25")),
    ("truth.sets", Some("20")),
    ("truth.sims", Some("1000")),
    ("model.structural", Some("coupled")),
    ("model.layers", Some("3")),
    ("model.hidden", Some("8")),
    ("model.gate_width", Some("8")),
    ("model.attention_layers", Some("1")),
    ("model.mask", Some("causal")),
    ("model.attention", Some("true")),
    ("model.progressive", Some("true")),
    ("train.epochs", Some("200")),
    ("train.patience", Some("20")),
    ("train.batch_size", Some("4")),
    ("train.val_fraction", Some("0.2")),
    ("train.lr", Some("0.001")),
    ("train.record_time", Some("false")),
    ("train.inductive", Some("false")),
    ("eval.k", Some("10")),
    ("bench.runs", Some("5")),
    ("bench.sims", Some("1000")),
    ("bench.seed_size", Some("10")),
];

pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (defaults in brackets):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k} [{}]\n", d.unwrap_or("required")));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn parse_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_pair(line).with_context(|| format!("{origin}:{}", i + 1))?);
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("`{s}` is not `key = value`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl RunConfig {
    /// Defaults, then `file`, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = KEYS
            .iter()
            .filter_map(|(k, d)| d.map(|d| (k.to_string(), d.to_string())))
            .collect();
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            pairs.extend(parse_lines(&text, &path.display().to_string())?);
        }
        pairs.extend(overrides.iter().cloned());
        for (k, v) in pairs {
            if !KEYS.iter().any(|(name, _)| *name == k) {
                bail!("unknown configuration key `{k}` (see `dysuse --help`)");
            }
            values.insert(k, v);
        }
        let cfg = RunConfig { values };
        cfg.master_seed()?;
        Ok(cfg)
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key).ok_or_else(|| anyhow!("configuration key `{key}` is required"))?;
        raw.parse().map_err(|e| anyhow!("bad value `{raw}` for `{key}`: {e}"))
    }

    pub fn list(&self, key: &str) -> Result<Vec<usize>> {
        let raw = self.raw(key).ok_or_else(|| anyhow!("configuration key `{key}` is required"))?;
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| anyhow!("bad entry `{s}` in `{key}`")))
            .collect()
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.get("master_seed")
            .context("a master seed is mandatory: pass --seed or set `master_seed`")
    }

    pub fn perturbation(&self) -> Result<Perturbation> {
        Ok(Perturbation {
            sample_fraction: self.get("graph.sample_fraction")?,
            ..Perturbation::exact(
                self.get("graph.node_add")?,
                self.get("graph.node_del")?,
                self.get("graph.edge_add")?,
                self.get("graph.edge_del")?,
            )
        })
    }

    pub fn synthetic(&self) -> Result<SyntheticBa> {
        let generator: String = self.get("graph.generator")?;
        if generator != "ba" {
            bail!("unknown generator `{generator}` (ba)");
        }
        Ok(SyntheticBa {
            n: self.get("graph.n")?,
            m_attach: self.get("graph.m")?,
            n_snapshots: self.get("graph.t")?,
            initial_fraction: self.get("graph.initial_fraction")?,
            perturbation: self.perturbation()?,
        })
    }

    pub fn diffusion(&self) -> Result<DiffusionModelSpec> {
        let hop_cap = match self.raw("diffusion.hop_cap") {
            None | Some("none") => None,
            Some(_) => Some(self.get("diffusion.hop_cap")?),
        };
        let kind: DiffusionKind = self.get("diffusion.kind")?;
        let policy: AttemptPolicy = self.get("diffusion.attempts")?;
        Ok(DiffusionModelSpec::new(kind, hop_cap, policy)?)
    }

    pub fn model(&self, n_snapshots: usize) -> Result<ModelConfig> {
        Ok(ModelConfig {
            structural: StructuralConfig {
                kind: self.get("model.structural")?,
                layers: self.get("model.layers")?,
                hidden: self.get("model.hidden")?,
                gate_width: self.get("model.gate_width")?,
            },
            n_snapshots,
            attention_layers: self.get("model.attention_layers")?,
            mask: self.get("model.mask")?,
            use_attention: self.get("model.attention")?,
            use_progressive: self.get("model.progressive")?,
            init_seed: self.master_seed()?,
        })
    }

    pub fn train(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.get("train.epochs")?,
            patience: self.get("train.patience")?,
            batch_size: self.get("train.batch_size")?,
            val_fraction: self.get("train.val_fraction")?,
            adam: AdamConfig {
                lr: self.get("train.lr")?,
                ..AdamConfig::default()
            },
            rng_seed: self.master_seed()?,
            record_time: self.get("train.record_time")?,
            inductive: self.get("train.inductive")?,
        })
    }
}
