use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{DySuseModel, PreparedGraph};
use crate::dyngraph::DynamicGraph;
use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig, Tensor};
use crate::oracle::{GroundTruthDataset, GroundTruthRecord};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Seed sets per optimizer step (gradients are summed).
    pub batch_size: usize,
    pub val_fraction: f64,
    pub adam: AdamConfig,
    pub rng_seed: u64,
    /// Fill the `seconds` column of the log. Off by default so that logs of
    /// identical runs are byte-identical.
    pub record_time: bool,
    /// Allow a dataset generated on a different graph.
    pub inductive: bool,
}

impl TrainConfig {
    pub fn new(rng_seed: u64) -> Self {
        TrainConfig {
            epochs: 200,
            patience: 20,
            batch_size: 4,
            val_fraction: 0.2,
            adam: AdamConfig::default(),
            rng_seed,
            record_time: false,
            inductive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-seed-set L1 loss over the training sets.
    pub train_loss: f64,
    /// Mean per-node absolute error over the validation sets.
    pub val_mae: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Row 0 is the untrained model.
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_mae,seconds\n");
        for r in &self.epochs {
            let secs = r.seconds.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
            writeln!(s, "{},{},{},{secs}", r.epoch, r.train_loss, r.val_mae).unwrap();
        }
        s
    }

    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

fn mean_val_mae(model: &DySuseModel, g: &PreparedGraph, records: &[&GroundTruthRecord]) -> Result<f64> {
    let maes = records
        .par_iter()
        .map(|r| {
            let pred = model.predict(g, &r.seeds)?;
            Ok(super::loss(&pred, r.table.final_values())? / g.n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(maes.iter().sum::<f64>() / maes.len() as f64)
}

fn mean_loss(model: &DySuseModel, g: &PreparedGraph, records: &[&GroundTruthRecord]) -> Result<f64> {
    let losses = records
        .par_iter()
        .map(|r| super::loss(&model.predict(g, &r.seeds)?, r.table.final_values()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Minimizes the summed L1 loss at the last timestamp with Adam, keeping the
/// parameters with the best validation error (the untrained model included).
pub fn train(model: &mut DySuseModel, g: &DynamicGraph, data: &GroundTruthDataset, cfg: &TrainConfig) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if !cfg.inductive && data.graph_hash != g.fingerprint() {
        return Err(Error::invalid("dataset was generated on a different graph (enable inductive mode to allow this)"));
    }
    if data.n_nodes() != g.n_global() {
        return Err(Error::invalid(format!(
            "dataset covers {} nodes, graph has {}",
            data.n_nodes(),
            g.n_global()
        )));
    }
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(Error::invalid("batch size must be positive and validation fraction in [0, 1)"));
    }
    let prepared = model.prepare(g)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(rng::derive_seed(cfg.rng_seed, "split"), 0));
    let n_val = ((data.len() as f64) * cfg.val_fraction).round() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_ids, train_ids) = order.split_at(n_val);
    let mut train_ids = train_ids.to_vec();
    let mut val_ids = val_ids.to_vec();
    train_ids.sort_unstable();
    val_ids.sort_unstable();
    let train_set: Vec<&GroundTruthRecord> = train_ids.iter().map(|&i| &data.records[i]).collect();
    // a single record validates on itself
    let val_set: Vec<&GroundTruthRecord> = if val_ids.is_empty() {
        train_set.clone()
    } else {
        val_ids.iter().map(|&i| &data.records[i]).collect()
    };

    let start = Instant::now();
    let stamp = |cfg: &TrainConfig| cfg.record_time.then(|| start.elapsed().as_secs_f64());
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_loss: mean_loss(model, &prepared, &train_set)?,
        val_mae: mean_val_mae(model, &prepared, &val_set)?,
        seconds: stamp(cfg),
    }];
    let mut best = (epochs[0].val_mae, 0usize, model.params().clone());
    let mut opt = Adam::new(cfg.adam);
    let shuffle_seed = rng::derive_seed(cfg.rng_seed, "shuffle");
    let mut batch_order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        batch_order.shuffle(&mut rng::stream(shuffle_seed, epoch as u64));
        let mut total = 0.0;
        for chunk in batch_order.chunks(cfg.batch_size) {
            let results = chunk
                .par_iter()
                .map(|&i| {
                    let r = train_set[i];
                    model.loss_and_grads(&prepared, &r.seeds, r.table.final_values())
                })
                .collect::<Result<Vec<(f64, Vec<Tensor>)>>>()?;
            let mut sum: Option<Vec<Tensor>> = None;
            for (l, grads) in results {
                total += l;
                match &mut sum {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            opt.step(model.params_mut(), &sum.expect("nonempty chunk"))?;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_mae: mean_val_mae(model, &prepared, &val_set)?,
            seconds: stamp(cfg),
        };
        if rec.val_mae < best.0 {
            best = (rec.val_mae, epoch, model.params().clone());
        }
        epochs.push(rec);
        if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    *model.params_mut() = best.2;
    Ok(TrainLog {
        epochs,
        best_epoch: best.1,
        train_ids,
        val_ids,
    })
}
