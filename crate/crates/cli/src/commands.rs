use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dysuse_core::dyngraph::{assemble, load_temporal_edgelist, read_archive, top_degree_set, write_archive, NodeId};
use dysuse_core::eval::{
    benchmark, evaluate_mae, evaluate_precision, topk_overlap_report, EvalReport,
};
use dysuse_core::model::{train as fit, DySuseModel, ModelConfig, TrainConfig, TrainLog};
use dysuse_core::oracle::{estimate_susceptibility, generate_ground_truth, GroundTruthDataset};
use dysuse_core::DynamicGraph;

use crate::artifacts::{verify, Staging};
use crate::config::RunConfig;
use crate::{AblateArgs, BenchArgs, CaseStudyArgs, EvalArgs, SimulateArgs, TrainArgs, TruthArgs};

fn check_manifest(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    if !verify(path)? {
        eprintln!("warning: no manifest lists {}; integrity not checked", path.display());
    }
    Ok(())
}

fn load_graph(path: &Path, stage: &mut Staging) -> Result<DynamicGraph> {
    check_manifest(path)?;
    stage.input(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_archive(&text).with_context(|| format!("loading graph {}", path.display()))
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn load_truth(csv: &Path, stage: &mut Staging) -> Result<GroundTruthDataset> {
    let meta = meta_path(csv);
    check_manifest(csv)?;
    check_manifest(&meta)?;
    stage.input(csv)?;
    stage.input(&meta)?;
    GroundTruthDataset::load(csv, &meta).with_context(|| format!("loading ground truth {}", csv.display()))
}

fn load_model(path: &Path, stage: &mut Staging) -> Result<DySuseModel> {
    check_manifest(path)?;
    stage.input(path)?;
    DySuseModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn parse_ids(s: &str, n: usize) -> Result<Vec<NodeId>> {
    let mut ids: Vec<NodeId> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().with_context(|| format!("bad node id `{x}`")))
        .collect::<Result<_>>()?;
    ids.sort_unstable();
    ids.dedup();
    if let Some(&v) = ids.iter().find(|&&v| v >= n) {
        bail!("seed {v} outside the graph's {n} nodes");
    }
    Ok(ids)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph").to_string()
}

pub fn graph(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "graph")?;
    let seed = cfg.master_seed()?;
    let g = match cfg.raw("graph.source") {
        Some("generate") => cfg.synthetic()?.build(seed)?,
        Some("ingest") => {
            let path = PathBuf::from(cfg.raw("graph.path").context("ingesting needs `graph.path` or --ingest")?);
            stage.input(&path)?;
            let records = load_temporal_edgelist(&path, cfg.get("graph.directed")?)?;
            assemble(
                &records,
                cfg.get("graph.t")?,
                cfg.get("graph.initial_fraction")?,
                &cfg.perturbation()?,
                seed,
            )?
        }
        other => bail!("unknown graph source `{}` (generate, ingest)", other.unwrap_or("")),
    };
    let mut archive = Vec::new();
    write_archive(&g, &mut archive)?;
    stage.write("graph.dysg", archive)?;
    let mut stats = String::from("t,nodes,edges\n");
    for s in g.snapshots() {
        writeln!(stats, "{},{},{}", s.index(), s.nodes().len(), s.edges().len())?;
    }
    stage.write("graph_stats.csv", stats)?;
    stage.commit(cfg)
}

pub fn simulate(cfg: &RunConfig, out: &Path, a: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "simulate")?;
    let g = load_graph(&a.graph, &mut stage)?;
    let seeds = parse_ids(&a.seeds, g.n_global())?;
    let table = estimate_susceptibility(&g, &cfg.diffusion()?, &seeds, cfg.get("truth.sims")?, cfg.master_seed()?)?;
    let mut csv = String::from("t,node,value\n");
    for (t, row) in table.values.iter().enumerate() {
        for (v, x) in row.iter().enumerate() {
            writeln!(csv, "{t},{v},{x}")?;
        }
    }
    stage.write("susceptibility.csv", csv)?;
    let mut spread = String::from("t,spread\n");
    for (t, s) in table.spread.iter().enumerate() {
        writeln!(spread, "{t},{s}")?;
    }
    stage.write("spread.csv", spread)?;
    stage.commit(cfg)
}

pub fn truth(cfg: &RunConfig, out: &Path, a: &TruthArgs) -> Result<Vec<PathBuf>> {
    let label = if a.name == "truth" { a.name.clone() } else { format!("truth-{}", a.name) };
    let mut stage = Staging::new(out, &label)?;
    let g = load_graph(&a.graph, &mut stage)?;
    let data = generate_ground_truth(
        &g,
        &cfg.diffusion()?,
        &cfg.list("truth.sizes")?,
        cfg.get("truth.sets")?,
        cfg.get("truth.sims")?,
        cfg.master_seed()?,
    )?;
    let csv = stage.path(&format!("{}.csv", a.name));
    let meta = stage.path(&format!("{}.meta", a.name));
    data.save(&csv, &meta)?;
    stage.commit(cfg)
}

fn train_one(
    model_cfg: ModelConfig,
    g: &DynamicGraph,
    data: &GroundTruthDataset,
    train_cfg: &TrainConfig,
) -> Result<(DySuseModel, TrainLog)> {
    let mut model = DySuseModel::new(model_cfg)?;
    let log = fit(&mut model, g, data, train_cfg)?;
    Ok((model, log))
}

pub fn train(cfg: &RunConfig, out: &Path, a: &TrainArgs) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "train")?;
    let g = load_graph(&a.graph, &mut stage)?;
    let data = load_truth(&a.truth, &mut stage)?;
    let (model, log) = train_one(cfg.model(g.n_snapshots())?, &g, &data, &cfg.train()?)?;
    let best = log.best();
    eprintln!(
        "best epoch {} of {}: validation MAE {:.4}",
        best.epoch,
        log.epochs.len() - 1,
        best.val_mae
    );
    stage.write("model.ckpt", model.to_checkpoint())?;
    stage.write("train_log.csv", log.to_csv())?;
    stage.commit(cfg)
}

pub fn eval(cfg: &RunConfig, out: &Path, a: &EvalArgs) -> Result<Vec<PathBuf>> {
    let Some(ckpt) = &a.checkpoint else {
        bail!("eval needs a trained checkpoint: pass --checkpoint <model.ckpt> (run `dysuse train` first)");
    };
    let mut stage = Staging::new(out, "eval")?;
    let model = load_model(ckpt, &mut stage)?;
    let g = load_graph(&a.graph, &mut stage)?;
    let data = load_truth(&a.truth, &mut stage)?;
    let prepared = model.prepare(&g)?;
    let name = stem(&a.graph);
    let k: usize = cfg.get("eval.k")?;
    let mut report = EvalReport {
        mae: evaluate_mae(&model, &prepared, &data, &name, "dysuse")?,
        precision: vec![evaluate_precision(&model, &prepared, &data, k, &name, "dysuse")?],
        config: cfg.values().clone(),
        ..EvalReport::default()
    };
    report.config.insert("checkpoint".into(), ckpt.display().to_string());
    stage.write("eval_mae.csv", report.mae_csv())?;
    stage.write("eval_precision.csv", report.precision_csv())?;
    let table = report.mae_table();
    print!("{table}");
    stage.write("eval_table.txt", table)?;
    stage.commit(cfg)
}

pub fn bench(cfg: &RunConfig, out: &Path, a: &BenchArgs) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "bench")?;
    let model = load_model(&a.checkpoint, &mut stage)?;
    let g = load_graph(&a.graph, &mut stage)?;
    let seeds = top_degree_set(&g, cfg.get("bench.seed_size")?)?;
    let report = benchmark(
        &g,
        &model,
        &cfg.diffusion()?,
        &seeds,
        cfg.get("bench.sims")?,
        cfg.get("bench.runs")?,
        cfg.master_seed()?,
    )?;
    eprintln!(
        "model {:.3e}s, simulation {:.3e}s, ratio {:.1}x ({})",
        report.model_seconds,
        report.mc_seconds,
        report.ratio(),
        report.machine
    );
    stage.write("timing.csv", report.to_csv())?;
    stage.commit(cfg)
}

pub fn ablate(cfg: &RunConfig, out: &Path, a: &AblateArgs) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "ablate")?;
    let g = load_graph(&a.graph, &mut stage)?;
    let train_data = load_truth(&a.truth, &mut stage)?;
    let test_data = load_truth(&a.test_truth, &mut stage)?;
    let full = cfg.model(g.n_snapshots())?;
    let train_cfg = cfg.train()?;
    let last = g.last_only();
    let variants: [(&str, ModelConfig, &DynamicGraph); 4] = [
        ("full", full, &g),
        ("no-attention", ModelConfig { use_attention: false, ..full }, &g),
        ("no-progressive", ModelConfig { use_progressive: false, ..full }, &g),
        ("static", ModelConfig { n_snapshots: 1, ..full }, &last),
    ];
    let name = stem(&a.graph);
    let mut report = EvalReport {
        config: cfg.values().clone(),
        ..EvalReport::default()
    };
    let untrained = DySuseModel::new(full)?;
    report
        .mae
        .extend(evaluate_mae(&untrained, &untrained.prepare(&g)?, &test_data, &name, "untrained")?);
    for (label, model_cfg, graph) in variants {
        let tc = TrainConfig {
            inductive: train_cfg.inductive || label == "static",
            ..train_cfg
        };
        eprintln!("training {label}");
        let (model, log) = train_one(model_cfg, graph, &train_data, &tc)?;
        stage.write(&format!("train_log_{label}.csv"), log.to_csv())?;
        report
            .mae
            .extend(evaluate_mae(&model, &model.prepare(graph)?, &test_data, &name, label)?);
    }
    stage.write("ablation_mae.csv", report.mae_csv())?;
    let table = report.mae_table();
    print!("{table}");
    stage.write("ablation_table.txt", table)?;
    stage.commit(cfg)
}

pub fn case_study(cfg: &RunConfig, out: &Path, a: &CaseStudyArgs) -> Result<Vec<PathBuf>> {
    let mut stage = Staging::new(out, "case-study")?;
    let model = load_model(&a.checkpoint, &mut stage)?;
    let g = load_graph(&a.graph, &mut stage)?;
    let seeds = parse_ids(&a.seeds, g.n_global())?;
    let pred = model.predict(&model.prepare(&g)?, &seeds)?;
    let table = estimate_susceptibility(&g, &cfg.diffusion()?, &seeds, cfg.get("truth.sims")?, cfg.master_seed()?)?;
    let mc = table.final_values();
    let k: usize = cfg.get("eval.k")?;
    let report = topk_overlap_report(&pred, mc, k, &seeds)?;
    let text = format!(
        "seeds {}\ntop-{k} overlap {}/{k} (* = in both lists)\n{}",
        seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "),
        report.overlap(),
        report.to_text("model", "simulation")
    );
    print!("{text}");
    stage.write("case_study.txt", text)?;
    let mut csv = String::from("node,predicted,simulated\n");
    for v in 0..g.n_global() {
        writeln!(csv, "{v},{},{}", pred[v], mc[v])?;
    }
    stage.write("case_study.csv", csv)?;
    stage.commit(cfg)
}
