//! Metrics, rankings, timing, and report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use crate::diffusion::DiffusionModelSpec;
use crate::dyngraph::{DynamicGraph, NodeId};
use crate::error::{Error, Result};
use crate::model::{DySuseModel, PreparedGraph};
use crate::oracle::{estimate_susceptibility, GroundTruthDataset};

/// Mean absolute error over all nodes.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid(format!("cannot compare {} predictions with {} targets", pred.len(), truth.len())));
    }
    Ok(pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len() as f64)
}

/// The `k` highest-valued nodes outside `exclude`, best first; ties go to
/// the lower id.
pub fn top_k(values: &[f64], k: usize, exclude: &[NodeId]) -> Result<Vec<NodeId>> {
    let skip: BTreeSet<NodeId> = exclude.iter().copied().collect();
    let mut ids: Vec<NodeId> = (0..values.len()).filter(|v| !skip.contains(v)).collect();
    if k == 0 || k > ids.len() {
        return Err(Error::invalid(format!("k={k} but only {} nodes can be ranked", ids.len())));
    }
    ids.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    ids.truncate(k);
    Ok(ids)
}

/// `|top_k(pred) ∩ top_k(truth)| / k`, with `exclude` removed from both.
pub fn precision_at_k(pred: &[f64], truth: &[f64], k: usize, exclude: &[NodeId]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    let p: BTreeSet<NodeId> = top_k(pred, k, exclude)?.into_iter().collect();
    let hits = top_k(truth, k, exclude)?.into_iter().filter(|v| p.contains(v)).count();
    Ok(hits as f64 / k as f64)
}

/// Side-by-side top-k lists with overlap marks.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKReport {
    /// `(node, also in the other list)`, best first.
    pub predicted: Vec<(NodeId, bool)>,
    pub truth: Vec<(NodeId, bool)>,
}

impl TopKReport {
    pub fn overlap(&self) -> usize {
        self.predicted.iter().filter(|(_, o)| *o).count()
    }

    /// Two lines; overlapping ids carry a `*`.
    pub fn to_text(&self, pred_label: &str, truth_label: &str) -> String {
        let fmt = |xs: &[(NodeId, bool)]| {
            xs.iter()
                .map(|(v, o)| if *o { format!("{v}*") } else { v.to_string() })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let w = pred_label.len().max(truth_label.len());
        format!(
            "{truth_label:<w$}  {}\n{pred_label:<w$}  {}\n",
            fmt(&self.truth),
            fmt(&self.predicted)
        )
    }
}

pub fn topk_overlap_report(pred: &[f64], truth: &[f64], k: usize, exclude: &[NodeId]) -> Result<TopKReport> {
    let p = top_k(pred, k, exclude)?;
    let t = top_k(truth, k, exclude)?;
    let (ps, ts): (BTreeSet<_>, BTreeSet<_>) = (p.iter().copied().collect(), t.iter().copied().collect());
    Ok(TopKReport {
        predicted: p.iter().map(|v| (*v, ts.contains(v))).collect(),
        truth: t.iter().map(|v| (*v, ps.contains(v))).collect(),
    })
}

pub fn machine_descriptor() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{} cpus={} threads={}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cpus,
        rayon::current_num_threads()
    )
}

/// Wall-clock medians of a model forward pass and of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub n_nodes: usize,
    pub n_snapshots: usize,
    pub n_sims: usize,
    pub runs: usize,
    pub model_seconds: f64,
    pub mc_seconds: f64,
    pub machine: String,
}

impl TimingReport {
    /// How many times faster the model is than the simulation.
    pub fn ratio(&self) -> f64 {
        self.mc_seconds / self.model_seconds
    }

    pub fn to_csv(&self) -> String {
        format!(
            "n_nodes,n_snapshots,n_sims,runs,model_seconds,mc_seconds,ratio,machine\n{},{},{},{},{:.6e},{:.6e},{:.1},{}\n",
            self.n_nodes,
            self.n_snapshots,
            self.n_sims,
            self.runs,
            self.model_seconds,
            self.mc_seconds,
            self.ratio(),
            self.machine
        )
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn time_it<T>(f: impl FnOnce() -> Result<T>) -> Result<f64> {
    let start = Instant::now();
    std::hint::black_box(f()?);
    Ok(start.elapsed().as_secs_f64())
}

/// Median timings over `runs` repetitions. The model time covers graph
/// preparation and the forward pass.
pub fn benchmark(
    g: &DynamicGraph,
    model: &DySuseModel,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    n_sims: usize,
    runs: usize,
    master_seed: u64,
) -> Result<TimingReport> {
    if runs == 0 {
        return Err(Error::invalid("benchmark needs at least one run"));
    }
    let mut model_t = Vec::with_capacity(runs);
    let mut mc_t = Vec::with_capacity(runs);
    for run in 0..runs {
        model_t.push(time_it(|| model.predict(&model.prepare(g)?, seeds))?);
        mc_t.push(time_it(|| estimate_susceptibility(g, spec, seeds, n_sims, master_seed.wrapping_add(run as u64)))?);
    }
    Ok(TimingReport {
        n_nodes: g.n_global(),
        n_snapshots: g.n_snapshots(),
        n_sims,
        runs,
        model_seconds: median(model_t),
        mc_seconds: median(mc_t),
        machine: machine_descriptor(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub dataset: String,
    pub seed_size: usize,
    pub method: String,
    pub mae: f64,
    pub n_sets: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionRow {
    pub dataset: String,
    pub method: String,
    pub k: usize,
    pub precision: f64,
    pub n_sets: usize,
}

/// Everything an evaluation run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub mae: Vec<MaeRow>,
    pub precision: Vec<PrecisionRow>,
    pub timing: Option<TimingReport>,
    pub config: BTreeMap<String, String>,
}

/// Per-seed-size mean MAE of `model` on `data`, plus the overall mean under
/// `seed_size = 0`.
pub fn evaluate_mae(
    model: &DySuseModel,
    g: &PreparedGraph,
    data: &GroundTruthDataset,
    dataset: &str,
    method: &str,
) -> Result<Vec<MaeRow>> {
    let seeds: Vec<Vec<NodeId>> = data.records.iter().map(|r| r.seeds.clone()).collect();
    let preds = model.predict_many(g, &seeds)?;
    let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, p) in data.records.iter().zip(&preds) {
        by_size.entry(r.seeds.len()).or_default().push(mae(p, r.table.final_values())?);
    }
    let all: Vec<f64> = by_size.values().flatten().copied().collect();
    let mut rows: Vec<MaeRow> = by_size
        .into_iter()
        .map(|(k, xs)| MaeRow {
            dataset: dataset.to_string(),
            seed_size: k,
            method: method.to_string(),
            mae: xs.iter().sum::<f64>() / xs.len() as f64,
            n_sets: xs.len(),
        })
        .collect();
    rows.push(MaeRow {
        dataset: dataset.to_string(),
        seed_size: 0,
        method: method.to_string(),
        mae: all.iter().sum::<f64>() / all.len().max(1) as f64,
        n_sets: all.len(),
    });
    Ok(rows)
}

/// Mean Precision@k over the records of `data`, seeds excluded.
pub fn evaluate_precision(
    model: &DySuseModel,
    g: &PreparedGraph,
    data: &GroundTruthDataset,
    k: usize,
    dataset: &str,
    method: &str,
) -> Result<PrecisionRow> {
    let seeds: Vec<Vec<NodeId>> = data.records.iter().map(|r| r.seeds.clone()).collect();
    let preds = model.predict_many(g, &seeds)?;
    let mut total = 0.0;
    for (r, p) in data.records.iter().zip(&preds) {
        total += precision_at_k(p, r.table.final_values(), k, &r.seeds)?;
    }
    Ok(PrecisionRow {
        dataset: dataset.to_string(),
        method: method.to_string(),
        k,
        precision: total / data.len().max(1) as f64,
        n_sets: data.len(),
    })
}

impl EvalReport {
    /// Look up one MAE cell; `seed_size = 0` is the overall mean.
    pub fn mae_of(&self, dataset: &str, method: &str, seed_size: usize) -> Option<f64> {
        self.mae
            .iter()
            .find(|r| r.dataset == dataset && r.method == method && r.seed_size == seed_size)
            .map(|r| r.mae)
    }

    pub fn mae_csv(&self) -> String {
        let mut s = String::from("dataset,seed_size,method,mae,n_sets\n");
        for r in &self.mae {
            let size = if r.seed_size == 0 { "all".to_string() } else { r.seed_size.to_string() };
            writeln!(s, "{},{size},{},{},{}", r.dataset, r.method, r.mae, r.n_sets).unwrap();
        }
        s
    }

    pub fn precision_csv(&self) -> String {
        let mut s = String::from("dataset,method,k,precision,n_sets\n");
        for r in &self.precision {
            writeln!(s, "{},{},{},{},{}", r.dataset, r.method, r.k, r.precision, r.n_sets).unwrap();
        }
        s
    }

    /// Datasets and seed sizes as rows, methods as columns, three decimals.
    pub fn mae_table(&self) -> String {
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.mae {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let mut keys: Vec<(&str, usize)> = Vec::new();
        for r in &self.mae {
            if !keys.contains(&(r.dataset.as_str(), r.seed_size)) {
                keys.push((&r.dataset, r.seed_size));
            }
        }
        let dw = keys.iter().map(|(d, _)| d.len()).max().unwrap_or(7).max(7);
        let cw: Vec<usize> = methods.iter().map(|m| m.len().max(6)).collect();
        let mut s = format!("{:<dw$}  {:>9}", "dataset", "seed size");
        for (m, w) in methods.iter().zip(&cw) {
            write!(s, "  {m:>w$}").unwrap();
        }
        s.push('\n');
        for (d, k) in keys {
            let size = if k == 0 { "all".to_string() } else { k.to_string() };
            write!(s, "{d:<dw$}  {size:>9}").unwrap();
            for (m, w) in methods.iter().zip(&cw) {
                match self.mae_of(d, m, k) {
                    Some(x) => write!(s, "  {x:>w$.3}").unwrap(),
                    None => write!(s, "  {:>w$}", "-").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn config_text(&self) -> String {
        self.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
