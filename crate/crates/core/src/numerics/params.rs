use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

const FORMAT: &str = "dysuse-checkpoint v1";

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<ParamId> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("bad parameter name `{name}`")));
        }
        if self.names.contains(&name) {
            return Err(Error::invalid(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name);
        self.tensors.push(t);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape` as a differentiable leaf; the returned
    /// vector is indexed by [`ParamId::index`].
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(t.clone())).collect()
    }

    /// Like [`ParamSet::bind`] but without gradient tracking.
    pub fn bind_constant(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.constant(t.clone())).collect()
    }

    /// Writes a text checkpoint: a header, `config` lines, then each tensor
    /// with values in 17 significant digits.
    pub fn write_checkpoint(&self, config: &BTreeMap<String, String>) -> String {
        let mut s = format!("{FORMAT}\n");
        for (k, v) in config {
            writeln!(s, "config {k} {v}").unwrap();
        }
        for (name, t) in self.iter() {
            writeln!(s, "param {name} {} {}", t.rows(), t.cols()).unwrap();
            let vals: Vec<String> = t.data().iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(s, "{}", vals.join(" ")).unwrap();
        }
        s.push_str("end\n");
        s
    }

    pub fn read_checkpoint(text: &str) -> Result<(ParamSet, BTreeMap<String, String>)> {
        let mut lines = text.lines();
        match lines.next() {
            Some(FORMAT) => {}
            Some(h) if h.starts_with("dysuse-checkpoint") => return Err(Error::Version(h.to_string())),
            _ => return Err(Error::Corrupt("not a checkpoint".into())),
        }
        let mut config = BTreeMap::new();
        let mut params = ParamSet::new();
        while let Some(line) = lines.next() {
            if line == "end" {
                return Ok((params, config));
            }
            let mut it = line.splitn(3, ' ');
            match it.next() {
                Some("config") => {
                    let (k, v) = (it.next(), it.next().unwrap_or(""));
                    let k = k.ok_or_else(|| Error::Corrupt(format!("bad config line `{line}`")))?;
                    config.insert(k.to_string(), v.to_string());
                }
                Some("param") => {
                    let name = it.next().ok_or_else(|| Error::Corrupt("param without name".into()))?;
                    let dims: Vec<usize> = it
                        .next()
                        .unwrap_or("")
                        .split(' ')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Corrupt(format!("bad shape for `{name}`")))?;
                    let [rows, cols] = dims[..] else {
                        return Err(Error::Corrupt(format!("bad shape for `{name}`")));
                    };
                    let vals: Vec<f64> = lines
                        .next()
                        .ok_or_else(|| Error::Corrupt(format!("missing values for `{name}`")))?
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Corrupt(format!("bad value in `{name}`")))?;
                    let t = Tensor::new(rows, cols, vals).map_err(|_| Error::Corrupt(format!("wrong value count for `{name}`")))?;
                    params.insert(name, t).map_err(|e| Error::Corrupt(e.to_string()))?;
                }
                _ => return Err(Error::Corrupt(format!("unexpected line `{line}`"))),
            }
        }
        Err(Error::Corrupt("checkpoint is truncated".into()))
    }
}
