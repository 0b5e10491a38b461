use rayon::prelude::*;

use super::{SusceptibilityTable, TableSource};
use crate::diffusion::{simulate, DiffusionModelSpec};
use crate::dyngraph::{DynamicGraph, NodeId};
use crate::error::{Error, Result};
use crate::rng;

const CHUNK: usize = 64;

struct Tally {
    hits: Vec<u32>,
    sizes: Vec<u64>,
}

impl Tally {
    fn new(t: usize, n: usize) -> Self {
        Tally {
            hits: vec![0; t * n],
            sizes: vec![0; t],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        for (a, b) in self.sizes.iter_mut().zip(other.sizes) {
            *a += b;
        }
        self
    }
}

fn run_chunk(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    sims: std::ops::Range<usize>,
    master_seed: u64,
) -> Result<Tally> {
    let n = g.n_global();
    let mut tally = Tally::new(g.n_snapshots(), n);
    for i in sims {
        let mut rng = rng::stream(master_seed, i as u64);
        simulate(g, spec, seeds, &mut rng, |t, state| {
            let row = &mut tally.hits[t * n..(t + 1) * n];
            for &v in state.influenced() {
                row[v] += 1;
            }
            tally.sizes[t] += state.influenced().len() as u64;
        })?;
    }
    Ok(tally)
}

fn finish(g: &DynamicGraph, seeds: &[NodeId], n_sims: usize, tally: Tally) -> SusceptibilityTable {
    let n = g.n_global();
    let denom = n_sims as f64;
    let values = tally
        .hits
        .chunks(n)
        .map(|row| row.iter().map(|&c| f64::from(c) / denom).collect())
        .collect();
    SusceptibilityTable {
        values,
        seeds: seeds.to_vec(),
        source: TableSource::MonteCarlo { n_simulations: n_sims },
        spread: tally.sizes.iter().map(|&s| s as f64 / denom).collect(),
    }
}

fn check(n_sims: usize) -> Result<()> {
    if n_sims == 0 {
        return Err(Error::invalid("at least one simulation is required"));
    }
    Ok(())
}

/// Monte-Carlo susceptibility over `n_sims` simulations, fanned out over the
/// current rayon pool. Simulation `i` always draws from stream `i` of
/// `master_seed`, and counts are integers, so the table does not depend on
/// the number of workers.
pub fn estimate_susceptibility(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    n_sims: usize,
    master_seed: u64,
) -> Result<SusceptibilityTable> {
    check(n_sims)?;
    let chunks = n_sims.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| run_chunk(g, spec, seeds, c * CHUNK..((c + 1) * CHUNK).min(n_sims), master_seed))
        .try_reduce(|| Tally::new(g.n_snapshots(), g.n_global()), |a, b| Ok(a.merge(b)))?;
    Ok(finish(g, seeds, n_sims, tally))
}

/// Same as [`estimate_susceptibility`] on the calling thread only.
pub fn estimate_susceptibility_serial(
    g: &DynamicGraph,
    spec: &DiffusionModelSpec,
    seeds: &[NodeId],
    n_sims: usize,
    master_seed: u64,
) -> Result<SusceptibilityTable> {
    check(n_sims)?;
    let tally = run_chunk(g, spec, seeds, 0..n_sims, master_seed)?;
    Ok(finish(g, seeds, n_sims, tally))
}
