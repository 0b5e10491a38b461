use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{estimate_susceptibility, SusceptibilityTable, TableSource};
use crate::diffusion::{DiffusionKind, DiffusionModelSpec};
use crate::dyngraph::{seed_sets, DynamicGraph, NodeId};
use crate::error::{Error, Result};
use crate::rng;

const FORMAT: &str = "dysuse-truth v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub id: usize,
    pub seeds: Vec<NodeId>,
    pub table: SusceptibilityTable,
}

/// Monte-Carlo ground truth for many seed sets on one graph and one
/// diffusion model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthDataset {
    pub records: Vec<GroundTruthRecord>,
    pub graph_hash: String,
    pub spec: DiffusionModelSpec,
    pub n_sims: usize,
    pub master_seed: u64,
}

/// One record per `(size, set)`: for each size, `sets_per_size - 1` random
/// sets plus the top-degree set, each estimated with `n_sims` simulations.
pub fn generate_ground_truth(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seed_sizes: &[usize],
    sets_per_size: usize,
    n_sims: usize,
    master_seed: u64,
) -> Result<GroundTruthDataset> {
    let set_seed = rng::derive_seed(master_seed, "seed-sets");
    let mut all_sets = Vec::new();
    for &k in seed_sizes {
        all_sets.extend(seed_sets(g, k, sets_per_size, set_seed)?);
    }
    let records = all_sets
        .into_iter()
        .enumerate()
        .map(|(id, seeds)| {
            let mc_seed = rng::derive_seed(master_seed, &format!("mc/{id}"));
            let table = estimate_susceptibility(g, spec, &seeds, n_sims, mc_seed)?;
            Ok(GroundTruthRecord { id, seeds, table })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruthDataset {
        records,
        graph_hash: g.fingerprint(),
        spec: *spec,
        n_sims,
        master_seed,
    })
}

impl GroundTruthDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.records.first().map_or(0, |r| r.table.n_nodes())
    }

    pub fn n_snapshots(&self) -> usize {
        self.records.first().map_or(0, |r| r.table.n_snapshots())
    }

    /// `seed_set_id,t,node,value` rows, values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::from("seed_set_id,t,node,value\n");
        for r in &self.records {
            for (t, row) in r.table.values.iter().enumerate() {
                for (v, x) in row.iter().enumerate() {
                    writeln!(buf, "{},{t},{v},{x}", r.id).unwrap();
                }
            }
            out.write_all(buf.as_bytes())?;
            buf.clear();
        }
        Ok(())
    }

    pub fn write_metadata<W: Write>(&self, mut out: W) -> Result<()> {
        let cap = self.spec.hop_cap.map_or_else(|| "none".to_string(), |c| c.to_string());
        let mut s = String::new();
        writeln!(s, "format = {FORMAT}").unwrap();
        writeln!(s, "graph_hash = {}", self.graph_hash).unwrap();
        writeln!(s, "diffusion.kind = {}", self.spec.kind).unwrap();
        writeln!(s, "diffusion.hop_cap = {cap}").unwrap();
        writeln!(s, "diffusion.attempts = {}", self.spec.attempt_policy).unwrap();
        writeln!(s, "n_sims = {}", self.n_sims).unwrap();
        writeln!(s, "master_seed = {}", self.master_seed).unwrap();
        writeln!(s, "n_nodes = {}", self.n_nodes()).unwrap();
        writeln!(s, "n_snapshots = {}", self.n_snapshots()).unwrap();
        writeln!(s, "n_records = {}", self.len()).unwrap();
        for r in &self.records {
            let ids: Vec<String> = r.seeds.iter().map(ToString::to_string).collect();
            writeln!(s, "seed_set.{} = {}", r.id, ids.join(" ")).unwrap();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(csv_path, csv)?;
        let mut meta = Vec::new();
        self.write_metadata(&mut meta)?;
        std::fs::write(meta_path, meta)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta = std::fs::read_to_string(meta_path)?;
        let csv = std::fs::read_to_string(csv_path)?;
        Self::parse(&csv, &meta)
    }

    pub fn parse(csv: &str, meta: &str) -> Result<Self> {
        let kv = parse_kv(meta)?;
        let get = |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| Error::Corrupt(format!("metadata lacks `{k}`")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Corrupt(format!("bad value for `{k}`"))) };
        let format = get("format")?;
        if format != FORMAT {
            return Err(Error::Version(format!("expected `{FORMAT}`, found `{format}`")));
        }
        let kind: DiffusionKind = get("diffusion.kind")?.parse()?;
        let hop_cap = match get("diffusion.hop_cap")? {
            "none" => None,
            c => Some(c.parse().map_err(|_| Error::Corrupt("bad hop cap".into()))?),
        };
        let spec = DiffusionModelSpec::new(kind, hop_cap, get("diffusion.attempts")?.parse()?)?;
        let n_sims = num("n_sims")? as usize;
        let n = num("n_nodes")? as usize;
        let t_count = num("n_snapshots")? as usize;
        let n_records = num("n_records")? as usize;

        let mut records = Vec::with_capacity(n_records);
        for id in 0..n_records {
            let seeds = get(&format!("seed_set.{id}"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Corrupt(format!("bad seed id `{s}`"))))
                .collect::<Result<Vec<NodeId>>>()?;
            records.push(GroundTruthRecord {
                id,
                seeds: seeds.clone(),
                table: SusceptibilityTable {
                    values: vec![vec![f64::NAN; n]; t_count],
                    seeds,
                    source: TableSource::MonteCarlo { n_simulations: n_sims },
                    spread: vec![0.0; t_count],
                },
            });
        }

        let mut lines = csv.lines();
        if lines.next() != Some("seed_set_id,t,node,value") {
            return Err(Error::Corrupt("missing CSV header".into()));
        }
        let mut filled = 0usize;
        for (i, line) in lines.enumerate() {
            let bad = || Error::Corrupt(format!("CSV line {}: `{line}`", i + 2));
            let mut it = line.split(',');
            let mut field = || it.next().ok_or_else(bad);
            let id: usize = field()?.parse().map_err(|_| bad())?;
            let t: usize = field()?.parse().map_err(|_| bad())?;
            let v: usize = field()?.parse().map_err(|_| bad())?;
            let x: f64 = field()?.parse().map_err(|_| bad())?;
            let cell = records
                .get_mut(id)
                .and_then(|r| r.table.values.get_mut(t))
                .and_then(|row| row.get_mut(v))
                .ok_or_else(bad)?;
            if !cell.is_nan() || !(0.0..=1.0).contains(&x) {
                return Err(bad());
            }
            *cell = x;
            filled += 1;
        }
        if filled != n_records * t_count * n {
            return Err(Error::Corrupt(format!("expected {} values, found {filled}", n_records * t_count * n)));
        }
        for r in &mut records {
            r.table.spread = r.table.values.iter().map(|row| row.iter().sum()).collect();
        }
        Ok(GroundTruthDataset {
            records,
            graph_hash: get("graph_hash")?.to_string(),
            spec,
            n_sims,
            master_seed: num("master_seed")?,
        })
    }
}

/// `key = value` lines; `#` comments and blank lines ignored.
pub(crate) fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Corrupt(format!("line {} is not `key = value`", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}
