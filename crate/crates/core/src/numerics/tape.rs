use std::sync::Arc;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    Sum(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Relu1(Var),
    MaskedSoftmax(Var),
    AbsDiffSum(Var, Arc<[f64]>),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    OuterRows(Var, Var),
    Reshape(Var),
    BatchedMatVec(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a computation for reverse-mode differentiation. Values are
/// immutable once recorded; a fresh tape is used for every forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every recorded value that needs one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` when `v` did not influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A value whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", ta.shape(), tb.shape())));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let out = matmul_data(ta.data(), tb.data(), m, k, n);
        let g = self.needs(&[a, b]);
        Ok(self.push(Tensor::new(m, n, out)?, Op::MatMul(a, b), g))
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        let g = self.needs(&[a, b]);
        Ok(self.push(out, op, g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a * s` for a 1×1 tensor `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.shape() != (1, 1) {
            return Err(Error::shape("scale", format!("scalar expected, got {:?}", ts.shape())));
        }
        let k = ts.item();
        let ta = self.value(a);
        let out = Tensor::new(ta.rows(), ta.cols(), ta.data().iter().map(|x| x * k).collect())?;
        let g = self.needs(&[a, s]);
        Ok(self.push(out, Op::Scale(a, s), g))
    }

    /// Adds the `1 × cols` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(r));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(Error::shape("add_row", format!("{:?} + {:?}", ta.shape(), tr.shape())));
        }
        let c = ta.cols();
        let mut data = ta.data().to_vec();
        for row in data.chunks_exact_mut(c.max(1)) {
            for (x, y) in row.iter_mut().zip(tr.data()) {
                *x += y;
            }
        }
        let out = Tensor::new(ta.rows(), c, data)?;
        let g = self.needs(&[a, r]);
        Ok(self.push(out, Op::AddRow(a, r), g))
    }

    /// Multiplies row `i` of `a` by `c[i]` for a `rows × 1` column `c`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Result<Var> {
        let (ta, tc) = (self.value(a), self.value(c));
        if tc.cols() != 1 || tc.rows() != ta.rows() {
            return Err(Error::shape("mul_col", format!("{:?} * {:?}", ta.shape(), tc.shape())));
        }
        let n = ta.cols();
        let mut data = ta.data().to_vec();
        for (row, &k) in data.chunks_exact_mut(n.max(1)).zip(tc.data()) {
            row.iter_mut().for_each(|x| *x *= k);
        }
        let out = Tensor::new(ta.rows(), n, data)?;
        let g = self.needs(&[a, c]);
        Ok(self.push(out, Op::MulCol(a, c), g))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(Error::shape("concat_cols", format!("{:?} | {:?}", ta.shape(), tb.shape())));
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row_slice(r));
            data.extend_from_slice(tb.row_slice(r));
        }
        let out = Tensor::new(ta.rows(), ta.cols() + tb.cols(), data)?;
        let g = self.needs(&[a, b]);
        Ok(self.push(out, Op::ConcatCols(a, b), g))
    }

    /// Columns `start..start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        if start + len > ta.cols() {
            return Err(Error::shape("slice_cols", format!("{start}+{len} of {:?}", ta.shape())));
        }
        let mut data = Vec::with_capacity(ta.rows() * len);
        for r in 0..ta.rows() {
            data.extend_from_slice(&ta.row_slice(r)[start..start + len]);
        }
        let out = Tensor::new(ta.rows(), len, data)?;
        let g = self.needs(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start), g))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let g = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), g)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data).expect("same length");
        let g = self.needs(&[a]);
        self.push(out, op, g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.map(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    /// `min(max(x, 0), 1)`.
    pub fn relu1(&mut self, a: Var) -> Var {
        self.map(a, |x| x.clamp(0.0, 1.0), Op::Relu1(a))
    }

    /// Row-wise softmax of `a + mask`, where row `r` of `a` uses row
    /// `r % mask.rows()` of the additive mask. Masked (−∞) entries come out
    /// as exact zeros; a fully masked row is all zeros.
    pub fn masked_softmax(&mut self, a: Var, mask: &Tensor) -> Result<Var> {
        let ta = self.value(a);
        if mask.cols() != ta.cols() || mask.rows() == 0 {
            return Err(Error::shape("masked_softmax", format!("{:?} with mask {:?}", ta.shape(), mask.shape())));
        }
        let c = ta.cols();
        let mut out = vec![0.0; ta.len()];
        for r in 0..ta.rows() {
            let m = mask.row_slice(r % mask.rows());
            let x = ta.row_slice(r);
            let max = x
                .iter()
                .zip(m)
                .filter(|(_, &mk)| mk != f64::NEG_INFINITY)
                .map(|(&v, &mk)| v + mk)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let row = &mut out[r * c..(r + 1) * c];
            let mut total = 0.0;
            for j in 0..c {
                if m[j] != f64::NEG_INFINITY {
                    row[j] = (x[j] + m[j] - max).exp();
                    total += row[j];
                }
            }
            for y in row.iter_mut() {
                *y /= total;
            }
        }
        let out = Tensor::new(ta.rows(), c, out)?;
        let g = self.needs(&[a]);
        Ok(self.push(out, Op::MaskedSoftmax(a), g))
    }

    /// `Σ |a - target|` as a 1×1 value.
    pub fn abs_diff_sum(&mut self, a: Var, target: &[f64]) -> Result<Var> {
        let ta = self.value(a);
        if ta.len() != target.len() {
            return Err(Error::shape("abs_diff_sum", format!("{} values vs {} targets", ta.len(), target.len())));
        }
        let s = ta.data().iter().zip(target).map(|(x, y)| (x - y).abs()).sum();
        let g = self.needs(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::AbsDiffSum(a, target.into()), g))
    }

    /// Mean absolute difference between `a` and `target`.
    pub fn mae(&mut self, a: Var, target: &[f64]) -> Result<Var> {
        let s = self.abs_diff_sum(a, target)?;
        let inv = self.constant(Tensor::scalar(1.0 / target.len().max(1) as f64));
        self.scale(s, inv)
    }

    /// Row `idx[i]` of `a` becomes row `i` of the output.
    pub fn gather_rows(&mut self, a: Var, idx: &Arc<[usize]>) -> Result<Var> {
        let ta = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= ta.rows()) {
            return Err(Error::shape("gather_rows", format!("row {bad} of {:?}", ta.shape())));
        }
        let c = ta.cols();
        let mut data = vec![0.0; idx.len() * c];
        if c == 1 {
            for (o, &i) in data.iter_mut().zip(idx.iter()) {
                *o = ta.data()[i];
            }
        } else {
            for (orow, &i) in data.chunks_exact_mut(c.max(1)).zip(idx.iter()) {
                orow.iter_mut().zip(ta.row_slice(i)).for_each(|(o, x)| *o = *x);
            }
        }
        let out = Tensor::new(idx.len(), c, data)?;
        let g = self.needs(&[a]);
        Ok(self.push(out, Op::GatherRows(a, idx.clone()), g))
    }

    /// Output row `idx[i]` accumulates row `i` of `a`; `n_out` rows in total.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &Arc<[usize]>, n_out: usize) -> Result<Var> {
        let ta = self.value(a);
        if idx.len() != ta.rows() {
            return Err(Error::shape("scatter_add_rows", format!("{} indices for {:?}", idx.len(), ta.shape())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n_out) {
            return Err(Error::shape("scatter_add_rows", format!("target row {bad} of {n_out}")));
        }
        let c = ta.cols();
        let mut data = vec![0.0; n_out * c];
        for (i, &dst) in idx.iter().enumerate() {
            for (o, x) in data[dst * c..(dst + 1) * c].iter_mut().zip(ta.row_slice(i)) {
                *o += x;
            }
        }
        let out = Tensor::new(n_out, c, data)?;
        let g = self.needs(&[a]);
        Ok(self.push(out, Op::ScatterAddRows(a, idx.clone()), g))
    }

    /// Per-row outer product: for `a, b` of shape `n × k` the output is
    /// `n × k·k` with entry `(r, i·k + j) = a[r,i] · b[r,j]`.
    pub fn outer_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("outer_rows", ta, tb)?;
        let k = ta.cols();
        let mut data = Vec::with_capacity(ta.rows() * k * k);
        for r in 0..ta.rows() {
            let (ra, rb) = (ta.row_slice(r), tb.row_slice(r));
            for &x in ra {
                data.extend(rb.iter().map(|y| x * y));
            }
        }
        let out = Tensor::new(ta.rows(), k * k, data)?;
        let g = self.needs(&[a, b]);
        Ok(self.push(out, Op::OuterRows(a, b), g))
    }

    /// Same data, new row-major shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let ta = self.value(a);
        if rows * cols != ta.len() {
            return Err(Error::shape("reshape", format!("{:?} to {rows}x{cols}", ta.shape())));
        }
        let out = Tensor::new(rows, cols, ta.data().to_vec())?;
        let g = self.needs(&[a]);
        Ok(self.push(out, Op::Reshape(a), g))
    }

    /// For `m` of shape `n × k·k` (one row-major `k × k` matrix per row) and
    /// `v` of shape `n × k`, returns `n × k` with row `r` equal to `M_r v_r`.
    pub fn batched_matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (tm, tv) = (self.value(m), self.value(v));
        let k = tv.cols();
        if tm.rows() != tv.rows() || tm.cols() != k * k {
            return Err(Error::shape("batched_matvec", format!("{:?} x {:?}", tm.shape(), tv.shape())));
        }
        let mut data = vec![0.0; tv.len()];
        for r in 0..tv.rows() {
            let (mr, vr) = (tm.row_slice(r), tv.row_slice(r));
            for i in 0..k {
                data[r * k + i] = (0..k).map(|j| mr[i * k + j] * vr[j]).sum();
            }
        }
        let out = Tensor::new(tv.rows(), k, data)?;
        let g = self.needs(&[m, v]);
        Ok(self.push(out, Op::BatchedMatVec(m, v), g))
    }

    /// Reverse pass from a 1×1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::invalid(format!("backward needs a scalar loss, got shape {shape:?}")));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &dyn Fn() -> Tensor| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let delta = f();
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        let like = |t: &Tensor, data: Vec<f64>| Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                acc(*a, &|| {
                    let mut out = vec![0.0; m * k];
                    for (orow, grow) in out.chunks_exact_mut(k.max(1)).zip(gd.chunks_exact(n.max(1))) {
                        for (o, brow) in orow.iter_mut().zip(tb.data().chunks_exact(n.max(1))) {
                            *o = dot(grow, brow);
                        }
                    }
                    like(ta, out)
                });
                acc(*b, &|| {
                    let mut out = vec![0.0; k * n];
                    for (arow, grow) in ta.data().chunks_exact(k.max(1)).zip(gd.chunks_exact(n.max(1))) {
                        for (&x, orow) in arow.iter().zip(out.chunks_exact_mut(n.max(1))) {
                            if x != 0.0 {
                                orow.iter_mut().zip(grow).for_each(|(o, y)| *o += x * y);
                            }
                        }
                    }
                    like(tb, out)
                });
            }
            Op::Add(a, b) => {
                acc(*a, &|| g.clone());
                acc(*b, &|| g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, &|| g.clone());
                acc(*b, &|| like(g, gd.iter().map(|x| -x).collect()));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                acc(*a, &|| like(ta, gd.iter().zip(tb.data()).map(|(x, y)| x * y).collect()));
                acc(*b, &|| like(tb, gd.iter().zip(ta.data()).map(|(x, y)| x * y).collect()));
            }
            Op::Scale(a, s) => {
                let (ta, k) = (val(*a), val(*s).item());
                acc(*a, &|| like(ta, gd.iter().map(|x| x * k).collect()));
                acc(*s, &|| Tensor::scalar(gd.iter().zip(ta.data()).map(|(x, y)| x * y).sum()));
            }
            Op::AddRow(a, r) => {
                acc(*a, &|| g.clone());
                let tr = val(*r);
                acc(*r, &|| {
                    let mut out = vec![0.0; tr.cols()];
                    for row in gd.chunks_exact(tr.cols().max(1)) {
                        out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
                    }
                    like(tr, out)
                });
            }
            Op::MulCol(a, c) => {
                let (ta, tc) = (val(*a), val(*c));
                let n = ta.cols().max(1);
                acc(*a, &|| {
                    let mut out = gd.to_vec();
                    for (row, &k) in out.chunks_exact_mut(n).zip(tc.data()) {
                        row.iter_mut().for_each(|x| *x *= k);
                    }
                    like(ta, out)
                });
                acc(*c, &|| {
                    let rows = gd.chunks_exact(n).zip(ta.data().chunks_exact(n));
                    like(tc, rows.map(|(g, x)| dot(g, x)).collect())
                });
            }
            Op::ConcatCols(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (ca, cb) = (ta.cols(), tb.cols());
                acc(*a, &|| {
                    let data = (0..ta.rows()).flat_map(|r| g.row_slice(r)[..ca].to_vec()).collect();
                    like(ta, data)
                });
                acc(*b, &|| {
                    let data = (0..tb.rows()).flat_map(|r| g.row_slice(r)[ca..ca + cb].to_vec()).collect();
                    like(tb, data)
                });
            }
            Op::SliceCols(a, start) => {
                let ta = val(*a);
                acc(*a, &|| {
                    let mut out = Tensor::zeros(ta.rows(), ta.cols());
                    let (c, len) = (ta.cols(), g.cols());
                    for r in 0..ta.rows() {
                        out.data_mut()[r * c + start..r * c + start + len].copy_from_slice(g.row_slice(r));
                    }
                    out
                });
            }
            Op::Sum(a) => {
                let ta = val(*a);
                acc(*a, &|| Tensor::filled(ta.rows(), ta.cols(), gd[0]));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                acc(*a, &|| like(y, gd.iter().zip(y.data()).map(|(x, s)| x * s * (1.0 - s)).collect()));
            }
            Op::LeakyRelu(a, slope) => {
                let ta = val(*a);
                acc(*a, &|| {
                    like(ta, gd.iter().zip(ta.data()).map(|(x, &z)| if z > 0.0 { *x } else { x * slope }).collect())
                });
            }
            Op::Relu1(a) => {
                let ta = val(*a);
                acc(*a, &|| {
                    like(ta, gd.iter().zip(ta.data()).map(|(x, &z)| if z > 0.0 && z <= 1.0 { *x } else { 0.0 }).collect())
                });
            }
            Op::MaskedSoftmax(a) => {
                let y = &node.value;
                acc(*a, &|| {
                    let c = y.cols();
                    let mut out = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            out[r * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    like(y, out)
                });
            }
            Op::AbsDiffSum(a, target) => {
                let ta = val(*a);
                acc(*a, &|| {
                    let data = ta
                        .data()
                        .iter()
                        .zip(target.iter())
                        .map(|(x, y)| {
                            let d = x - y;
                            gd[0] * if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }
                        })
                        .collect();
                    like(ta, data)
                });
            }
            Op::GatherRows(a, idx) => {
                let ta = val(*a);
                acc(*a, &|| {
                    let c = ta.cols();
                    let mut out = Tensor::zeros(ta.rows(), c);
                    for (i, &src) in idx.iter().enumerate() {
                        for (o, x) in out.data_mut()[src * c..(src + 1) * c].iter_mut().zip(g.row_slice(i)) {
                            *o += x;
                        }
                    }
                    out
                });
            }
            Op::ScatterAddRows(a, idx) => {
                let ta = val(*a);
                acc(*a, &|| {
                    let data = idx.iter().flat_map(|&dst| g.row_slice(dst).to_vec()).collect();
                    like(ta, data)
                });
            }
            Op::OuterRows(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let k = ta.cols();
                acc(*a, &|| {
                    let mut out = vec![0.0; ta.len()];
                    for r in 0..ta.rows() {
                        let (gr, rb) = (g.row_slice(r), tb.row_slice(r));
                        for i in 0..k {
                            out[r * k + i] = (0..k).map(|j| gr[i * k + j] * rb[j]).sum();
                        }
                    }
                    like(ta, out)
                });
                acc(*b, &|| {
                    let mut out = vec![0.0; tb.len()];
                    for r in 0..tb.rows() {
                        let (gr, ra) = (g.row_slice(r), ta.row_slice(r));
                        for j in 0..k {
                            out[r * k + j] = (0..k).map(|i| gr[i * k + j] * ra[i]).sum();
                        }
                    }
                    like(tb, out)
                });
            }
            Op::Reshape(a) => {
                let ta = val(*a);
                acc(*a, &|| like(ta, gd.to_vec()));
            }
            Op::BatchedMatVec(m, v) => {
                let (tm, tv) = (val(*m), val(*v));
                let k = tv.cols();
                acc(*m, &|| {
                    let mut out = vec![0.0; tm.len()];
                    for r in 0..tv.rows() {
                        let (gr, vr) = (g.row_slice(r), tv.row_slice(r));
                        for i in 0..k {
                            for j in 0..k {
                                out[r * k * k + i * k + j] = gr[i] * vr[j];
                            }
                        }
                    }
                    like(tm, out)
                });
                acc(*v, &|| {
                    let mut out = vec![0.0; tv.len()];
                    for r in 0..tv.rows() {
                        let (gr, mr) = (g.row_slice(r), tm.row_slice(r));
                        for j in 0..k {
                            out[r * k + j] = (0..k).map(|i| gr[i] * mr[i * k + j]).sum();
                        }
                    }
                    like(tv, out)
                });
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `m × k` times `k × n`.
fn matmul_data(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    if n == 1 {
        for (o, row) in out.iter_mut().zip(a.chunks_exact(k.max(1))) {
            *o = dot(row, b);
        }
        return out;
    }
    for (orow, arow) in out.chunks_exact_mut(n.max(1)).zip(a.chunks_exact(k.max(1))) {
        for (&x, brow) in arow.iter().zip(b.chunks_exact(n)) {
            if x != 0.0 {
                orow.iter_mut().zip(brow).for_each(|(o, y)| *o += x * y);
            }
        }
    }
    out
}
