use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DynamicGraph, Edge, NodeId, Snapshot, TemporalEdgeRecord};
use crate::error::{Error, Result};

/// Reads a whitespace-separated `src dst time [weight]` edge list. Lines
/// starting with `#` and blank lines are skipped. With `directed == false`
/// each row also yields its reverse.
pub fn load_temporal_edgelist(path: &Path, directed: bool) -> Result<Vec<TemporalEdgeRecord>> {
    let text = fs::read_to_string(path)?;
    parse_temporal_edgelist(&text, path, directed)
}

pub fn parse_temporal_edgelist(
    text: &str,
    origin: &Path,
    directed: bool,
) -> Result<Vec<TemporalEdgeRecord>> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err(format!("expected `src dst time [weight]`, got {} fields", fields.len())));
        }
        let id = |s: &str| -> Result<NodeId> {
            let v: i64 = s.parse().map_err(|_| err(format!("bad node id `{s}`")))?;
            if v < 0 {
                return Err(Error::invalid(format!(
                    "{}:{line_no}: negative node id {v}",
                    origin.display()
                )));
            }
            Ok(v as NodeId)
        };
        let src = id(fields[0])?;
        let dst = id(fields[1])?;
        let time: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad timestamp `{}`", fields[2])))?;
        let weight = match fields.get(3) {
            Some(s) => {
                let w: f64 = s.parse().map_err(|_| err(format!("bad weight `{s}`")))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(err(format!("weight {w} not in [0, 1]")));
                }
                Some(w)
            }
            None => None,
        };
        records.push(TemporalEdgeRecord { src, dst, time, weight });
        if !directed {
            records.push(TemporalEdgeRecord { src: dst, dst: src, time, weight });
        }
    }
    Ok(records)
}

/// Emits each record followed by its reverse.
pub fn symmetrize(records: &[TemporalEdgeRecord]) -> Vec<TemporalEdgeRecord> {
    records
        .iter()
        .flat_map(|r| {
            [
                r.clone(),
                TemporalEdgeRecord {
                    src: r.dst,
                    dst: r.src,
                    ..r.clone()
                },
            ]
        })
        .collect()
}

const ARCHIVE_MAGIC: &str = "dysuse-graph";

/// Writes the `dysuse-graph v1` text archive. Weights use 17 significant
/// digits so that reading them back is bit-exact.
pub fn write_archive<W: Write>(g: &DynamicGraph, mut out: W) -> Result<()> {
    writeln!(out, "{ARCHIVE_MAGIC} v1 {} {}", g.n_global(), g.n_snapshots())?;
    for s in g.snapshots() {
        writeln!(out, "snapshot {} {} {}", s.index(), s.nodes().len(), s.edges().len())?;
        let ids: Vec<String> = s.nodes().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", ids.join(" "))?;
        for e in s.edges() {
            writeln!(out, "{} {} {:.16e}", e.src, e.dst, e.weight)?;
        }
    }
    Ok(())
}

pub fn read_archive(text: &str) -> Result<DynamicGraph> {
    let corrupt = |line: usize, msg: &str| Error::Corrupt(format!("graph archive line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| corrupt(1, "empty archive"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 || head[0] != ARCHIVE_MAGIC {
        return Err(corrupt(1, "missing `dysuse-graph` header"));
    }
    if head[1] != "v1" {
        return Err(Error::Version(format!("graph archive {}", head[1])));
    }
    let n_global: usize = head[2].parse().map_err(|_| corrupt(1, "bad node count"))?;
    let t_count: usize = head[3].parse().map_err(|_| corrupt(1, "bad snapshot count"))?;

    let mut snapshots = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let (ln, line) = lines.next().ok_or_else(|| corrupt(0, "truncated before snapshot header"))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 || f[0] != "snapshot" || f[1] != t.to_string() {
            return Err(corrupt(ln, "expected `snapshot t |V| |E|`"));
        }
        let n_nodes: usize = f[2].parse().map_err(|_| corrupt(ln, "bad |V|"))?;
        let n_edges: usize = f[3].parse().map_err(|_| corrupt(ln, "bad |E|"))?;
        let (ln, line) = lines.next().ok_or_else(|| corrupt(ln + 1, "truncated node list"))?;
        let nodes = line
            .split_whitespace()
            .map(|s| s.parse::<NodeId>().map_err(|_| corrupt(ln, "bad node id")))
            .collect::<Result<Vec<_>>>()?;
        if nodes.len() != n_nodes {
            return Err(corrupt(ln, "node count does not match header"));
        }
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (ln, line) = lines.next().ok_or_else(|| corrupt(0, "truncated edge list"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(corrupt(ln, "expected `u v w`"));
            }
            let src = f[0].parse().map_err(|_| corrupt(ln, "bad source"))?;
            let dst = f[1].parse().map_err(|_| corrupt(ln, "bad target"))?;
            let weight = f[2].parse().map_err(|_| corrupt(ln, "bad weight"))?;
            edges.push(Edge { src, dst, weight });
        }
        snapshots.push(Snapshot::new(t, n_global, nodes, edges)?);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(corrupt(ln, &format!("trailing content `{extra}`")));
    }
    DynamicGraph::new(n_global, snapshots)
}
