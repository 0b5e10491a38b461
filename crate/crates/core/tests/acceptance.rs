//! Acceptance criteria AC-1 .. AC-9. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any asserted criterion fails.
//!
//! AC-7 is hardware-dependent: it is always measured and printed, but only
//! counts towards the exit status when `DYSUSE_REFERENCE_RUNNER` is set.

mod common;

use std::time::Instant;

use common::{grad_check, max_abs_grad, random_graph, stencil_kink, uniform_vec};
use dysuse_core::diffusion::{DiffusionKind, DiffusionModelSpec};
use dysuse_core::dyngraph::{assign_weights, top_degree_set, SyntheticBa};
use dysuse_core::eval::benchmark;
use dysuse_core::model::{train, DySuseModel, ModelConfig, TrainConfig};
use dysuse_core::numerics::{Tape, Var};
use dysuse_core::oracle::{
    estimate_susceptibility, exact_susceptibility, generate_ground_truth, GroundTruthDataset, SusceptibilityTable,
};
use dysuse_core::temporal::MaskOrientation;
use dysuse_core::{DynamicGraph, Edge};

struct Outcome {
    id: &'static str,
    pass: bool,
    asserted: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        pass,
        asserted: true,
        detail,
    }
}

fn jitter(model: &mut DySuseModel, seed: u64, scale: f64) {
    let params = model.params_mut();
    for (k, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let t = params.get_mut(id);
        let noise = uniform_vec(seed.wrapping_mul(7919).wrapping_add(k as u64), t.len(), -scale, scale);
        for (x, e) in t.data_mut().iter_mut().zip(noise) {
            *x += e;
        }
    }
}

// AC-1 and the AC-6 tables it produces.
fn ac1(tables: &mut Vec<SusceptibilityTable>) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut graphs = 0;
    for case in 0..25u64 {
        let n = 2 + (case as usize % 4);
        let t = 1 + (case as usize % 3);
        let g = random_graph(1000 + case, n, t, 5);
        let seeds = [case as usize % n];
        for kind in [DiffusionKind::Ic, DiffusionKind::Tr] {
            let spec = DiffusionModelSpec::of(kind);
            let exact = exact_susceptibility(&g, &spec, &seeds).expect("enumerable");
            let mc = estimate_susceptibility(&g, &spec, &seeds, 20_000, case).expect("valid input");
            worst = worst.max(mc.max_abs_diff(&exact));
            tables.push(mc);
        }
        graphs += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        "AC-1",
        worst <= 0.02 && secs <= 60.0 && graphs >= 20,
        format!("{graphs} graphs x {{IC, TR}}, max |MC - exact| = {worst:.4} (<= 0.02), {secs:.1}s (<= 60s)"),
    )
}

/// Every directed graph on nodes 0..5 with at most four edges, every single
/// seed: exact IC and exact TR tables must agree.
fn ac2() -> Outcome {
    let pairs: Vec<(usize, usize)> = (0..5)
        .flat_map(|s| (0..5).filter(move |&d| d != s).map(move |d| (s, d)))
        .collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, vec![])];
    while let Some((next, chosen)) = stack.pop() {
        let edges: Vec<Edge> = chosen
            .iter()
            .map(|&i| Edge {
                src: pairs[i].0,
                dst: pairs[i].1,
                weight: 1.0,
            })
            .collect();
        let g = assign_weights(&DynamicGraph::from_lists(vec![((0..5).collect(), edges)]).unwrap());
        for seed in 0..5 {
            let ic = exact_susceptibility(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[seed]).unwrap();
            let tr = exact_susceptibility(&g, &DiffusionModelSpec::of(DiffusionKind::Tr), &[seed]).unwrap();
            worst = worst.max(ic.max_abs_diff(&tr));
            checked += 1;
        }
        if chosen.len() < 4 {
            for i in next..pairs.len() {
                let mut c = chosen.clone();
                c.push(i);
                stack.push((i + 1, c));
            }
        }
    }
    outcome(
        "AC-2",
        worst <= 1e-12,
        format!("{checked} (graph, seed) cases, max |IC - TR| = {worst:.1e} (<= 1e-12)"),
    )
}

/// Central differences are only a valid reference where the loss is smooth
/// across the whole `±h` stencil, and say nothing where every gradient is
/// zero. Such draws are replaced by the next one.
fn ac3() -> Outcome {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-5;
    let g = random_graph(77, 10, 3, 24);
    let target = uniform_vec(78, 10, 0.0, 1.0);
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    let (mut accepted, mut rejected) = (0, Vec::new());
    let mut draw = 0u64;
    while accepted < 5 && draw < 50 {
        let mut model = DySuseModel::new(ModelConfig::new(3, draw)).unwrap();
        jitter(&mut model, draw, 0.5);
        let prep = model.prepare(&g).unwrap();
        let seeds = [draw as usize % 10, (draw as usize + 4) % 10];
        let loss = |t: &mut Tape, v: &[Var]| {
            let trace = model.record(t, v, &prep, &seeds).unwrap();
            t.abs_diff_sum(trace.y, &target).unwrap()
        };
        draw += 1;
        if max_abs_grad(model.params(), &loss) < FLOOR {
            rejected.push(format!("draw {}: saturated", draw - 1));
            continue;
        }
        if let Some(k) = stencil_kink(model.params(), H, &loss) {
            rejected.push(format!("draw {}: kink at {k}", draw - 1));
            continue;
        }
        let (w, where_) = grad_check(model.params(), H, FLOOR, &loss);
        if w > worst {
            worst = w;
            at = where_;
        }
        accepted += 1;
    }
    outcome(
        "AC-3",
        worst <= 1e-4 && accepted == 5,
        format!(
            "{accepted} draws, max relative gradient error {worst:.2e} (<= 1e-4){}; replaced: [{}]",
            if at.is_empty() { String::new() } else { format!(" at {at}") },
            rejected.join("; ")
        ),
    )
}

fn ac4() -> Outcome {
    let mut failures = Vec::new();
    for case in 0..1000u64 {
        let n = 3 + (case as usize % 12);
        let t = 1 + (case as usize % 4);
        let g = random_graph(5000 + case, n, t, 3 * n);
        let mut cfg = ModelConfig::new(t, case);
        cfg.mask = if case % 3 == 0 { MaskOrientation::Anticausal } else { MaskOrientation::Causal };
        cfg.attention_layers = 1 + (case as usize % 2);
        let mut model = DySuseModel::new(cfg).unwrap();
        jitter(&mut model, case, 1.0);
        let seeds: Vec<usize> = (0..(case as usize % 3)).map(|k| (case as usize + 3 * k) % n).collect();
        let prep = model.prepare(&g).unwrap();
        let mut tape = Tape::new();
        let vars = model.params().bind_constant(&mut tape);
        let trace = model.record(&mut tape, &vars, &prep, &seeds).unwrap();
        if !tape.value(trace.y).data().iter().all(|y| (0.0..=1.0).contains(y)) {
            failures.push(format!("case {case}: output outside [0, 1]"));
        }
        for out in &trace.structural {
            for &layer in &out.layers {
                if seeds.iter().any(|&s| tape.value(layer).data()[s] != 1.0) {
                    failures.push(format!("case {case}: seed not clamped"));
                }
            }
        }
        let att = trace.attention.as_ref().expect("attention on");
        let mask = cfg.mask.mask(t);
        for &w in &att.weights {
            let w = tape.value(w);
            for v in 0..n {
                for (k, m) in mask.data().iter().enumerate() {
                    if m.is_infinite() && w.row_slice(v)[k] != 0.0 {
                        failures.push(format!("case {case}: masked weight nonzero"));
                    }
                }
            }
        }
        // change the last snapshot: causal outputs before it must not move
        if cfg.mask == MaskOrientation::Causal && t > 1 {
            let mut lists: Vec<_> = g.snapshots().iter().map(|s| (s.nodes().to_vec(), s.edges().to_vec())).collect();
            let other = random_graph(9000 + case, n, 1, 3 * n);
            lists[t - 1] = (other.snapshot(0).nodes().to_vec(), other.snapshot(0).edges().to_vec());
            let g2 = DynamicGraph::from_lists(lists).unwrap();
            let prep2 = model.prepare(&g2).unwrap();
            let mut tape2 = Tape::new();
            let vars2 = model.params().bind_constant(&mut tape2);
            let trace2 = model.record(&mut tape2, &vars2, &prep2, &seeds).unwrap();
            let z1 = tape.value(att.z);
            let z2 = tape2.value(trace2.attention.as_ref().unwrap().z);
            for v in 0..n {
                for i in 0..t - 1 {
                    if z1.get(v, i).to_bits() != z2.get(v, i).to_bits() {
                        failures.push(format!("case {case}: causal output at t={i} moved"));
                    }
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        "1000 random models/graphs: bounded outputs, clamped seeds, zero masked weights, causal invariance".to_string()
    } else {
        format!("{} violations, first: {}", failures.len(), failures[0])
    };
    outcome("AC-4", failures.is_empty(), detail)
}

/// Shared setup of AC-5 / AC-7 / AC-8.
struct DeskRun {
    label: &'static str,
    test_mae: f64,
    model: DySuseModel,
}

const DESK_SEEDS: [u64; 3] = [1, 2, 3];
const DESK_LR: f64 = 1e-2;
const DESK_EPOCHS: usize = 300;
const DESK_PATIENCE: usize = 20;

fn test_mae(model: &DySuseModel, g: &DynamicGraph, data: &GroundTruthDataset) -> f64 {
    let prep = model.prepare(g).unwrap();
    let seeds: Vec<Vec<usize>> = data.records.iter().map(|r| r.seeds.clone()).collect();
    let preds = model.predict_many(&prep, &seeds).unwrap();
    let total: f64 = preds
        .iter()
        .zip(&data.records)
        .map(|(p, r)| dysuse_core::eval::mae(p, r.table.final_values()).unwrap())
        .sum();
    total / data.len() as f64
}

/// One replicate: graph, train/test truth, four trained variants and the
/// untrained model.
fn desk_replicate(seed: u64, tables: &mut Vec<SusceptibilityTable>, epoch50: &mut Vec<bool>) -> Vec<DeskRun> {
    let g = SyntheticBa::churned(100, 3, 5).build(seed).unwrap();
    let spec = DiffusionModelSpec::of(DiffusionKind::Ic);
    let sizes = [5, 10, 15, 20, 25];
    let train_data = generate_ground_truth(&g, &spec, &sizes, 20, 1000, seed).unwrap();
    let test_data = generate_ground_truth(&g, &spec, &sizes, 20, 1000, seed + 1000).unwrap();
    tables.extend(train_data.records.iter().chain(&test_data.records).map(|r| r.table.clone()));
    let last = g.last_only();
    let full = ModelConfig::new(5, seed);
    let variants: [(&'static str, ModelConfig, &DynamicGraph); 4] = [
        ("full", full, &g),
        ("no-attention", ModelConfig { use_attention: false, ..full }, &g),
        ("no-progressive", ModelConfig { use_progressive: false, ..full }, &g),
        ("static", ModelConfig { n_snapshots: 1, ..full }, &last),
    ];
    let untrained = DySuseModel::new(full).unwrap();
    let mut runs = vec![DeskRun {
        label: "untrained",
        test_mae: test_mae(&untrained, &g, &test_data),
        model: untrained,
    }];
    for (label, cfg, graph) in variants {
        let mut tc = TrainConfig::new(seed);
        tc.adam.lr = DESK_LR;
        tc.epochs = DESK_EPOCHS;
        tc.patience = DESK_PATIENCE;
        tc.inductive = label == "static";
        let mut model = DySuseModel::new(cfg).unwrap();
        let log = train(&mut model, graph, &train_data, &tc).unwrap();
        if label == "full" {
            if let Some(r50) = log.epochs.get(50) {
                epoch50.push(r50.train_loss < log.epochs[0].train_loss);
            }
        }
        runs.push(DeskRun {
            label,
            test_mae: test_mae(&model, graph, &test_data),
            model,
        });
    }
    runs
}

fn mean_of(reps: &[Vec<DeskRun>], label: &str) -> f64 {
    let xs: Vec<f64> = reps
        .iter()
        .map(|r| r.iter().find(|d| d.label == label).unwrap().test_mae)
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn per_seed(reps: &[Vec<DeskRun>], label: &str) -> String {
    reps.iter()
        .map(|r| format!("{:.4}", r.iter().find(|d| d.label == label).unwrap().test_mae))
        .collect::<Vec<_>>()
        .join("/")
}

fn ac5_ac8(reps: &[Vec<DeskRun>], epoch50: &[bool], secs: f64) -> (Outcome, Outcome) {
    let full = mean_of(reps, "full");
    let untrained = mean_of(reps, "untrained");
    let stat = mean_of(reps, "static");
    let noatt = mean_of(reps, "no-attention");
    let noprog = mean_of(reps, "no-progressive");
    let learns = epoch50.iter().all(|&b| b);
    let per_rep_secs = secs / reps.len() as f64;
    let ac5 = outcome(
        "AC-5",
        full <= 0.15 && full < untrained && full < stat && learns && per_rep_secs <= 900.0,
        format!(
            "mean test MAE over {} replicates: full {full:.4} [{}] (<= 0.15), untrained {untrained:.4}, static {stat:.4} [{}]; epoch-50 loss below epoch 0: {learns}; {per_rep_secs:.0}s per replicate",
            reps.len(),
            per_seed(reps, "full"),
            per_seed(reps, "static"),
        ),
    );
    let ac8 = outcome(
        "AC-8",
        noatt > full && noprog > full,
        format!(
            "mean test MAE: full {full:.4}, no-attention {noatt:.4} [{}], no-progressive {noprog:.4} [{}]",
            per_seed(reps, "no-attention"),
            per_seed(reps, "no-progressive"),
        ),
    );
    (ac5, ac8)
}

fn ac6(tables: &[SusceptibilityTable]) -> Outcome {
    let bad = tables.iter().filter(|t| !t.is_monotone()).count();
    outcome(
        "AC-6",
        bad == 0 && !tables.is_empty(),
        format!("{} Monte-Carlo tables, {bad} not monotone in t", tables.len()),
    )
}

fn ac7(model: &DySuseModel) -> Outcome {
    let g = SyntheticBa::churned(1000, 3, 5).build(7).unwrap();
    let seeds = top_degree_set(&g, 10).unwrap();
    let r = benchmark(&g, model, &DiffusionModelSpec::of(DiffusionKind::Ic), &seeds, 1000, 5, 7).unwrap();
    let asserted = std::env::var_os("DYSUSE_REFERENCE_RUNNER").is_some();
    Outcome {
        id: "AC-7",
        pass: r.ratio() >= 100.0,
        asserted,
        detail: format!(
            "1000 nodes, T=5: forward {:.2} ms, 1000-sim MC {:.1} ms, ratio {:.1}x (>= 100x) on {}{}",
            r.model_seconds * 1e3,
            r.mc_seconds * 1e3,
            r.ratio(),
            r.machine,
            if asserted { "" } else { " [indicative; set DYSUSE_REFERENCE_RUNNER to assert]" }
        ),
    }
}

fn ac9() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let g = SyntheticBa::churned(60, 3, 4).build(99).unwrap();
        let data = generate_ground_truth(&g, &DiffusionModelSpec::of(DiffusionKind::Ic), &[3, 6], 6, 300, 99).unwrap();
        let (csv, meta) = (dir.path().join("truth.csv"), dir.path().join("truth.meta"));
        data.save(&csv, &meta).unwrap();
        let mut model = DySuseModel::new(ModelConfig::new(4, 99)).unwrap();
        let mut tc = TrainConfig::new(99);
        tc.epochs = 8;
        let log = train(&mut model, &g, &data, &tc).unwrap();
        let ckpt = dir.path().join("model.ckpt");
        model.save(&ckpt).unwrap();
        (
            std::fs::read(&csv).unwrap(),
            std::fs::read(&meta).unwrap(),
            log.to_csv().into_bytes(),
            std::fs::read(&ckpt).unwrap(),
        )
    };
    let (a, b) = (run(), run());
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, a.3 == b.3];
    outcome(
        "AC-9",
        same.iter().all(|&s| s),
        format!("identical truth csv/meta, training log, checkpoint: {same:?}"),
    )
}

fn report(o: &Outcome) -> bool {
    let status = match (o.pass, o.asserted) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (not asserted)",
    };
    println!("{} {status}: {}", o.id, o.detail);
    o.pass || !o.asserted
}

/// `cargo test --test acceptance -- AC-3 AC-9` runs a subset. AC-6 needs the
/// tables from AC-1 and AC-5, so selecting it runs both.
fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC-")).collect();
    let on = |id: &str| wanted.is_empty() || wanted.iter().any(|w| w == id);
    let desk = ["AC-5", "AC-6", "AC-7", "AC-8"].iter().any(|id| on(id));
    let mut failed = 0;
    let mut check = |o: Outcome| {
        if !report(&o) {
            failed += 1;
        }
    };
    let mut tables = Vec::new();
    if on("AC-1") || on("AC-6") {
        check(ac1(&mut tables));
    }
    if on("AC-2") {
        check(ac2());
    }
    if on("AC-3") {
        check(ac3());
    }
    if on("AC-4") {
        check(ac4());
    }
    if desk {
        let start = Instant::now();
        let mut epoch50 = Vec::new();
        let reps: Vec<Vec<DeskRun>> = DESK_SEEDS
            .iter()
            .map(|&s| desk_replicate(s, &mut tables, &mut epoch50))
            .collect();
        let (ac5, ac8) = ac5_ac8(&reps, &epoch50, start.elapsed().as_secs_f64());
        if on("AC-5") {
            check(ac5);
        }
        if on("AC-6") {
            check(ac6(&tables));
        }
        if on("AC-7") {
            let trained = &reps[0].iter().find(|d| d.label == "full").unwrap().model;
            check(ac7(trained));
        }
        if on("AC-8") {
            check(ac8);
        }
    }
    if on("AC-9") {
        check(ac9());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
