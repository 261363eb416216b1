//! Reverse-mode differentiation over an append-only operation record.
//!
//! Nodes are appended in evaluation order, which is already a topological
//! order, so `backward` is a single reverse sweep. A tape created with
//! [`Tape::inference`] still evaluates every op but records no structure and
//! refuses `backward`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{mismatch, Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::{sigmoid, Tensor};

/// Clamp applied to probabilities before the logs in [`Tape::bce`].
pub const BCE_EPS: f64 = 1e-7;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Square(Var),
    Softmax(Var),
    LogSoftmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Mean { x: Var, axis: usize },
    Max { x: Var, argmax: Vec<usize> },
    SegmentMax { x: Var, argmax: Vec<usize> },
    Scale(Var, f64),
    Sum(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Minimum(Var, Var),
    PairSum(Var, Var),
    SelectRows { x: Var, rows: Vec<usize> },
    Pick { x: Var, flat: Vec<usize> },
    Reshape(Var),
    Transpose(Var),
    Bce { pred: Var, target: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    id: u64,
    tracing: bool,
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// A tape that records operations for `backward`.
    pub fn new() -> Self {
        Self::with_tracing(true)
    }

    /// A tape that only evaluates; `backward` on it is rejected.
    pub fn inference() -> Self {
        Self::with_tracing(false)
    }

    fn with_tracing(tracing: bool) -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            tracing,
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn is_tracing(&self) -> bool {
        self.tracing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.index].value
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = self.tracing && inputs.iter().any(|v| self.nodes[v.index].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(TensorError::InvalidArgument {
                op: "var",
                msg: "variable belongs to a different tape".into(),
            });
        }
        Ok(())
    }

    /// A constant input. Gradients never flow into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// A differentiable leaf not backed by a parameter store.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: self.tracing,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Binds a named parameter. Binding the same name twice returns the same
    /// variable so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some((_, v)) = self.params.iter().find(|(n, _)| n == name) {
            return Ok(*v);
        }
        let value = store.get(name)?.clone();
        let v = self.variable(value);
        self.params.push((name.to_string(), v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    /// Adds the `[1, c]` row `b` to every row of the `[r, c]` matrix `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.value(a).dims2()?;
        let bv = self.value(b);
        if bv.shape() != [1, c] {
            return Err(mismatch("add_row", self.value(a).shape(), bv.shape()));
        }
        let mut out = self.value(a).clone();
        let brow = bv.data().to_vec();
        for i in 0..r {
            for (o, bb) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(&brow) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddRow(a, b), &[a, b]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::exp);
        self.push(out, Op::Exp(x), &[x])
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        self.push(out, Op::Square(x), &[x])
    }

    /// Row-wise softmax over the last axis of a 2-D tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = softmax_rows(self.value(x))?;
        Ok(self.push(out, Op::Softmax(x), &[x]))
    }

    /// Row-wise log-softmax over the last axis of a 2-D tensor.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &src[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for j in 0..c {
                out[i * c + j] = row[j] - lse;
            }
        }
        let out = Tensor::new(vec![r, c], out)?;
        Ok(self.push(out, Op::LogSoftmax(x), &[x]))
    }

    /// Concatenates 2-D tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or(TensorError::InvalidArgument {
            op: "concat_cols",
            msg: "no inputs".into(),
        })?;
        let (r, _) = self.value(*first).dims2()?;
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (rx, cx) = self.value(x).dims2()?;
            if rx != r {
                return Err(mismatch("concat_cols", self.value(*first).shape(), self.value(x).shape()));
            }
            widths.push(cx);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; r * total];
        let mut offset = 0;
        for (&x, &w) in xs.iter().zip(&widths) {
            let src = self.value(x).data();
            for i in 0..r {
                out[i * total + offset..i * total + offset + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let out = Tensor::new(vec![r, total], out)?;
        Ok(self.push(out, Op::ConcatCols(xs.to_vec()), xs))
    }

    /// Stacks 2-D tensors with equal column counts on top of each other.
    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or(TensorError::InvalidArgument {
            op: "concat_rows",
            msg: "no inputs".into(),
        })?;
        let (_, c) = self.value(*first).dims2()?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &x in xs {
            let (rx, cx) = self.value(x).dims2()?;
            if cx != c {
                return Err(mismatch("concat_rows", self.value(*first).shape(), self.value(x).shape()));
            }
            data.extend_from_slice(self.value(x).data());
            rows += rx;
        }
        let out = Tensor::new(vec![rows, c], data)?;
        Ok(self.push(out, Op::ConcatRows(xs.to_vec()), xs))
    }

    /// Mean over `axis` of a 2-D tensor, keeping the reduced axis as size 1.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let out = match axis {
            0 => {
                let mut o = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        o[j] += src[i * c + j];
                    }
                }
                o.iter_mut().for_each(|v| *v /= r as f64);
                Tensor::new(vec![1, c], o)?
            }
            1 => {
                let o = (0..r).map(|i| src[i * c..(i + 1) * c].iter().sum::<f64>() / c as f64).collect();
                Tensor::new(vec![r, 1], o)?
            }
            _ => return Err(bad_axis("mean_axis", axis)),
        };
        Ok(self.push(out, Op::Mean { x, axis }, &[x]))
    }

    /// Max over `axis` of a 2-D tensor. Ties route the gradient to the first
    /// maximal entry.
    pub fn max_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let (out, argmax) = match axis {
            0 => {
                let mut o = vec![f64::NEG_INFINITY; c];
                let mut am = vec![0; c];
                for i in 0..r {
                    for j in 0..c {
                        if src[i * c + j] > o[j] {
                            o[j] = src[i * c + j];
                            am[j] = i * c + j;
                        }
                    }
                }
                (Tensor::new(vec![1, c], o)?, am)
            }
            1 => {
                let mut o = vec![f64::NEG_INFINITY; r];
                let mut am = vec![0; r];
                for i in 0..r {
                    for j in 0..c {
                        if src[i * c + j] > o[i] {
                            o[i] = src[i * c + j];
                            am[i] = i * c + j;
                        }
                    }
                }
                (Tensor::new(vec![r, 1], o)?, am)
            }
            _ => return Err(bad_axis("max_axis", axis)),
        };
        Ok(self.push(out, Op::Max { x, argmax }, &[x]))
    }

    /// Column-wise max within consecutive blocks of `group` rows:
    /// `[k·group, c] → [k, c]`. This is max pooling of k stacked point sets.
    pub fn segment_max(&mut self, x: Var, group: usize) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        if group == 0 || r % group != 0 {
            return Err(TensorError::InvalidArgument {
                op: "segment_max",
                msg: format!("{r} rows do not split into groups of {group}"),
            });
        }
        let k = r / group;
        let src = self.value(x).data();
        let mut o = vec![f64::NEG_INFINITY; k * c];
        let mut am = vec![0; k * c];
        for s in 0..k {
            for i in s * group..(s + 1) * group {
                let row = &src[i * c..(i + 1) * c];
                for j in 0..c {
                    if row[j] > o[s * c + j] {
                        o[s * c + j] = row[j];
                        am[s * c + j] = i * c + j;
                    }
                }
            }
        }
        let out = Tensor::new(vec![k, c], o)?;
        Ok(self.push(out, Op::SegmentMax { x, argmax: am }, &[x]))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let out = self.value(x).scale(k);
        self.push(out, Op::Scale(x, k), &[x])
    }

    /// Sum of all entries as a `[1, 1]` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        self.push(out, Op::Sum(x), &[x])
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.value(x).len().max(1) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Elementwise clamp. The gradient passes only strictly inside `(lo, hi)`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp { x, lo, hi }, &[x])
    }

    /// Elementwise minimum. The gradient goes to `a` only where `a < b`
    /// strictly, otherwise to `b`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "minimum", f64::min)?;
        Ok(self.push(out, Op::Minimum(a, b), &[a, b]))
    }

    /// All ordered pairs of rows: `[n, h] × [n, h] → [n², h]` where output row
    /// `i·n + j` is `a_i + b_j`. Splitting the first layer of a pair MLP this
    /// way equals applying it to every concatenation `(x_i ‖ x_j)`.
    pub fn pair_sum(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, h) = self.value(a).dims2()?;
        if self.value(b).shape() != [n, h] {
            return Err(mismatch("pair_sum", self.value(a).shape(), self.value(b).shape()));
        }
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; n * n * h];
        for i in 0..n {
            for j in 0..n {
                let o = &mut out[(i * n + j) * h..(i * n + j + 1) * h];
                for ((o, x), y) in o.iter_mut().zip(&av[i * h..(i + 1) * h]).zip(&bv[j * h..(j + 1) * h]) {
                    *o = x + y;
                }
            }
        }
        let out = Tensor::new(vec![n * n, h], out)?;
        Ok(self.push(out, Op::PairSum(a, b), &[a, b]))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            if i >= r {
                return Err(TensorError::InvalidArgument {
                    op: "select_rows",
                    msg: format!("row {i} out of range for {r} rows"),
                });
            }
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let out = Tensor::new(vec![rows.len(), c], out)?;
        Ok(self.push(out, Op::SelectRows { x, rows: rows.to_vec() }, &[x]))
    }

    /// Picks entries by flat index into a `[1, k]` row.
    pub fn pick(&mut self, x: Var, flat: &[usize]) -> Result<Var> {
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(flat.len());
        for &f in flat {
            out.push(*src.get(f).ok_or(TensorError::InvalidArgument {
                op: "pick",
                msg: format!("index {f} out of range for {} values", src.len()),
            })?);
        }
        let out = Tensor::new(vec![1, flat.len()], out)?;
        Ok(self.push(out, Op::Pick { x, flat: flat.to_vec() }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = Tensor::new(shape.to_vec(), self.value(x).data().to_vec())?;
        Ok(self.push(out, Op::Reshape(x), &[x]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        Ok(self.push(out, Op::Transpose(x), &[x]))
    }

    /// Elementwise binary cross-entropy of probabilities `pred` against
    /// `target ∈ {0, 1}`, with `pred` clamped into `[ε, 1−ε]` first.
    pub fn bce(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(mismatch("bce", p.shape(), target.shape()));
        }
        if let Some(bad) = target.data().iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(TensorError::InvalidArgument {
                op: "bce",
                msg: format!("target {bad} is not 0 or 1"),
            });
        }
        let out = p.zip_map(target, "bce", bce_value)?;
        Ok(self.push(
            out,
            Op::Bce {
                pred,
                target: target.clone(),
            },
            &[pred],
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.tracing {
            return Err(TensorError::Untraced("tape was created for inference".into()));
        }
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(TensorError::Untraced(format!(
                "loss has shape {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.nodes[loss.index].requires_grad {
            return Err(TensorError::Untraced("loss does not depend on any variable".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        for idx in (0..=loss.index).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        let params = self
            .params
            .iter()
            .map(|(name, v)| {
                let g = grads[v.index]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.value(*v).shape()));
                (name.clone(), g)
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let ga = g.matmul_nt(self.value(*b))?;
                    self.accumulate(grads, *a, ga)?;
                }
                if self.needs(*b) {
                    let gb = self.value(*a).matmul_tn(g)?;
                    self.accumulate(grads, *b, gb)?;
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.clone())?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.scale(-1.0))?;
            }
            Op::Mul(a, b) => {
                let ga = g.zip_map(self.value(*b), "mul", |x, y| x * y)?;
                let gb = g.zip_map(self.value(*a), "mul", |x, y| x * y)?;
                self.accumulate(grads, *a, ga)?;
                self.accumulate(grads, *b, gb)?;
            }
            Op::AddRow(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                if self.needs(*b) {
                    let (r, c) = g.dims2()?;
                    let mut gb = vec![0.0; c];
                    for i in 0..r {
                        for (acc, v) in gb.iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                    self.accumulate(grads, *b, Tensor::new(vec![1, c], gb)?)?;
                }
            }
            Op::Relu(x) => {
                let gx = g.zip_map(self.value(*x), "relu", |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Sigmoid(x) => {
                let gx = g.zip_map(out, "sigmoid", |gv, s| gv * s * (1.0 - s))?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Exp(x) => {
                let gx = g.zip_map(out, "exp", |gv, e| gv * e)?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Square(x) => {
                let gx = g.zip_map(self.value(*x), "square", |gv, xv| 2.0 * gv * xv)?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Softmax(x) => {
                let (r, c) = out.dims2()?;
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let (s, gr) = (out.row(i), g.row(i));
                    let dot: f64 = s.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        gx[i * c + j] = s[j] * (gr[j] - dot);
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![r, c], gx)?)?;
            }
            Op::LogSoftmax(x) => {
                let (r, c) = out.dims2()?;
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let (ls, gr) = (out.row(i), g.row(i));
                    let gsum: f64 = gr.iter().sum();
                    for j in 0..c {
                        gx[i * c + j] = gr[j] - ls[j].exp() * gsum;
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![r, c], gx)?)?;
            }
            Op::ConcatCols(xs) => {
                let (r, total) = g.dims2()?;
                let mut offset = 0;
                for &x in xs {
                    let (_, w) = self.value(x).dims2()?;
                    if self.needs(x) {
                        let mut gx = vec![0.0; r * w];
                        for i in 0..r {
                            gx[i * w..(i + 1) * w]
                                .copy_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                        }
                        self.accumulate(grads, x, Tensor::new(vec![r, w], gx)?)?;
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(xs) => {
                let (_, c) = g.dims2()?;
                let mut row = 0;
                for &x in xs {
                    let (rx, _) = self.value(x).dims2()?;
                    if self.needs(x) {
                        let gx = g.data()[row * c..(row + rx) * c].to_vec();
                        self.accumulate(grads, x, Tensor::new(vec![rx, c], gx)?)?;
                    }
                    row += rx;
                }
            }
            Op::Mean { x, axis } => {
                let (r, c) = self.value(*x).dims2()?;
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        gx[i * c + j] = if *axis == 0 {
                            g.data()[j] / r as f64
                        } else {
                            g.data()[i] / c as f64
                        };
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![r, c], gx)?)?;
            }
            Op::Max { x, argmax } | Op::SegmentMax { x, argmax } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                for (k, &src) in argmax.iter().enumerate() {
                    gx.data_mut()[src] += g.data()[k];
                }
                self.accumulate(grads, *x, gx)?;
            }
            Op::Scale(x, k) => self.accumulate(grads, *x, g.scale(*k))?,
            Op::Sum(x) => {
                let gv = g.data()[0];
                self.accumulate(grads, *x, Tensor::full(self.value(*x).shape(), gv))?;
            }
            Op::Clamp { x, lo, hi } => {
                let gx = g.zip_map(self.value(*x), "clamp", |gv, xv| {
                    if xv > *lo && xv < *hi {
                        gv
                    } else {
                        0.0
                    }
                })?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let mut ga = Tensor::zeros(g.shape());
                let mut gb = Tensor::zeros(g.shape());
                for k in 0..g.len() {
                    if av[k] < bv[k] {
                        ga.data_mut()[k] = g.data()[k];
                    } else {
                        gb.data_mut()[k] = g.data()[k];
                    }
                }
                self.accumulate(grads, *a, ga)?;
                self.accumulate(grads, *b, gb)?;
            }
            Op::PairSum(a, b) => {
                let (n, h) = self.value(*a).dims2()?;
                let mut ga = vec![0.0; n * h];
                let mut gb = vec![0.0; n * h];
                for i in 0..n {
                    for j in 0..n {
                        let row = g.row(i * n + j);
                        for k in 0..h {
                            ga[i * h + k] += row[k];
                            gb[j * h + k] += row[k];
                        }
                    }
                }
                self.accumulate(grads, *a, Tensor::new(vec![n, h], ga)?)?;
                self.accumulate(grads, *b, Tensor::new(vec![n, h], gb)?)?;
            }
            Op::SelectRows { x, rows } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                let (_, c) = gx.dims2()?;
                for (k, &i) in rows.iter().enumerate() {
                    for j in 0..c {
                        gx.data_mut()[i * c + j] += g.data()[k * c + j];
                    }
                }
                self.accumulate(grads, *x, gx)?;
            }
            Op::Pick { x, flat } => {
                let mut gx = Tensor::zeros(self.value(*x).shape());
                for (k, &f) in flat.iter().enumerate() {
                    gx.data_mut()[f] += g.data()[k];
                }
                self.accumulate(grads, *x, gx)?;
            }
            Op::Reshape(x) => {
                let gx = Tensor::new(self.value(*x).shape().to_vec(), g.data().to_vec())?;
                self.accumulate(grads, *x, gx)?;
            }
            Op::Transpose(x) => self.accumulate(grads, *x, g.transpose()?)?,
            Op::Bce { pred, target } => {
                let p = self.value(*pred);
                let mut gx = Tensor::zeros(p.shape());
                for k in 0..p.len() {
                    let pv = p.data()[k];
                    if pv > BCE_EPS && pv < 1.0 - BCE_EPS {
                        let t = target.data()[k];
                        gx.data_mut()[k] = g.data()[k] * (-t / pv + (1.0 - t) / (1.0 - pv));
                    }
                }
                self.accumulate(grads, *pred, gx)?;
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.index].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
        if !self.needs(v) {
            return Ok(());
        }
        match &mut grads[v.index] {
            Some(existing) => existing.add_assign(&g)?,
            slot => *slot = Some(g),
        }
        Ok(())
    }
}

/// Gradients from one backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: BTreeMap<String, Tensor>,
}

impl Gradients {
    /// Gradient of `v`; zeros when `v` did not participate in the loss.
    pub fn of(&self, tape: &Tape, v: Var) -> Tensor {
        self.grads
            .get(v.index)
            .and_then(Clone::clone)
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }

    /// Gradients of every parameter bound with [`Tape::param`], by name.
    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }
}

/// Loss of a single prediction, `−[t·ln p + (1−t)·ln(1−p)]` with `p` clamped.
pub fn bce_value(p: f64, t: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (r, c) = x.dims2()?;
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = x.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for j in 0..c {
            let e = (row[j] - m).exp();
            out[i * c + j] = e;
            z += e;
        }
        out[i * c..(i + 1) * c].iter_mut().for_each(|v| *v /= z);
    }
    Tensor::new(vec![r, c], out)
}

fn bad_axis(op: &'static str, axis: usize) -> TensorError {
    TensorError::InvalidArgument {
        op,
        msg: format!("axis {axis} is not 0 or 1 for a 2-D tensor"),
    }
}
