use rand::Rng;

use super::TemporalEdgeRecord;
use crate::error::{Error, Result};
use crate::rng;

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on `m_attach` nodes; every later node links to
/// `m_attach` distinct earlier nodes chosen with probability proportional to
/// their current degree. Returns one undirected record per edge, newest node
/// first, with `time` equal to the insertion index.
pub fn generate_ba(n: usize, m_attach: usize, rng_seed: u64) -> Result<Vec<TemporalEdgeRecord>> {
    if m_attach < 1 || n <= m_attach {
        return Err(Error::invalid(format!(
            "BA generator needs n > m_attach >= 1 (got n={n}, m_attach={m_attach})"
        )));
    }
    let mut rng = rng::stream(rng_seed, 0);
    let mut records = Vec::new();
    // every edge endpoint, so a uniform pick is a degree-proportional pick
    let mut endpoints: Vec<usize> = Vec::new();
    fn push(records: &mut Vec<TemporalEdgeRecord>, endpoints: &mut Vec<usize>, a: usize, b: usize) {
        let time = records.len() as f64;
        records.push(TemporalEdgeRecord { src: a, dst: b, time, weight: None });
        endpoints.push(a);
        endpoints.push(b);
    }
    for i in 0..m_attach {
        for j in (i + 1)..m_attach {
            push(&mut records, &mut endpoints, j, i);
        }
    }
    let mut targets = Vec::with_capacity(m_attach);
    for v in m_attach..n {
        targets.clear();
        while targets.len() < m_attach {
            let pick = if endpoints.is_empty() {
                rng.gen_range(0..v)
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
        for &u in &targets {
            push(&mut records, &mut endpoints, v, u);
        }
    }
    Ok(records)
}
