//! Reverse-mode automatic differentiation over 2-D dense values.
//!
//! A [`Tape`] records every operation as an append-only node list. Operands
//! always precede their consumers, so one reverse sweep from the loss node
//! visits every contributing node exactly once. Parameter leaves hold a
//! shared snapshot of the [`ParamStore`] tensor; [`Tape::backward`] adds the
//! resulting gradients into the store's gradient buffers, so repeated sweeps
//! accumulate until [`ParamStore::zero_grad`].

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::heads::crf::{self, CrfScores};
use crate::kernels;
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Exp,
    Log,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulBT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    StackRows(Vec<Var>),
    GatherRows { x: Var, ids: Vec<usize> },
    Sum(Var),
    LogSumExp(Var),
    Pick { x: Var, idx: Vec<usize> },
    Mask { x: Var, mask: Vec<f64> },
    CrfLogZ { emissions: Var, transitions: Var },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Arc<Vec<f64>>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    grads: Vec<Option<Vec<f64>>>,
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

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value: Arc::new(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::matrix(n.rows, n.cols, n.value.to_vec()).expect("node shape is consistent")
    }

    /// Gradient of the most recent [`Tape::backward`] loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Leaf)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Result<Var> {
        if rows * cols != values.len() {
            return Err(Error::shape("constant", &[rows, cols], &[values.len()]));
        }
        Ok(self.push(rows, cols, values, Op::Leaf))
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        self.nodes.push(Node {
            rows: t.rows(),
            cols: t.cols(),
            value: t.shared_values(),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, p) = self.shape(b);
        if k != k2 {
            return Err(Error::shape("matmul", &[m, k], &[k2, p]));
        }
        let mut out = vec![0.0; m * p];
        kernels::matmul(self.value(a), self.value(b), m, k, p, &mut out);
        Ok(self.push(m, p, out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (p, k2) = self.shape(b);
        if k != k2 {
            return Err(Error::shape("matmul_bt", &[m, k], &[p, k2]));
        }
        let mut out = vec![0.0; m * p];
        kernels::matmul_bt(self.value(a), self.value(b), m, k, p, &mut out);
        Ok(self.push(m, p, out, Op::MatMulBT(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(Error::shape(op, &[sa.0, sa.1], &[sb.0, sb.1]));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(r, c, out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(r, c, out, Op::Sub(a, b)))
    }

    /// Adds the `1×c` row vector `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        let (rr, rc) = self.shape(row);
        if rr != 1 || rc != c {
            return Err(Error::shape("add_row", &[r, c], &[rr, rc]));
        }
        let b = self.value(row);
        let mut out = self.value(a).to_vec();
        for chunk in out.chunks_exact_mut(c) {
            chunk.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(self.push(r, c, out, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(r, c, out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| x * s).collect();
        self.push(r, c, out, Op::Scale(a, s))
    }

    pub fn unary(&mut self, kind: Unary, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let xs = self.value(x);
        let out: Vec<f64> = match kind {
            Unary::Sigmoid => xs.iter().map(|&v| kernels::sigmoid(v)).collect(),
            Unary::Tanh => xs.iter().map(|v| v.tanh()).collect(),
            Unary::Exp => xs.iter().map(|v| v.exp()).collect(),
            Unary::Log => {
                if let Some(bad) = xs.iter().find(|&&v| v.is_nan() || v <= 0.0) {
                    return Err(Error::Domain {
                        op: "log",
                        msg: format!("non-positive input {bad}"),
                    });
                }
                xs.iter().map(|v| v.ln()).collect()
            }
        };
        Ok(self.push(r, c, out, Op::Unary(kind, x)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Unary::Sigmoid, x).expect("sigmoid is total")
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Unary::Tanh, x).expect("tanh is total")
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Unary::Exp, x).expect("exp is total")
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Log, x)
    }

    /// Row-wise softmax with per-row max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_exact_mut(c) {
            kernels::softmax_in_place(row);
        }
        self.push(r, c, out, Op::SoftmaxRows(x))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let mut out = self.value(x).to_vec();
        for row in out.chunks_exact_mut(c) {
            let lse = kernels::logsumexp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(r, c, out, Op::LogSoftmaxRows(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat_cols of zero tensors".into()));
        };
        let rows = self.shape(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(Error::shape("concat_cols", &[rows], &[r]));
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > c {
            return Err(Error::Index {
                what: "slice_cols columns",
                index: start + len,
                size: c,
            });
        }
        let xs = self.value(x);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xs[i * c + start..i * c + start + len]);
        }
        Ok(self.push(r, len, out, Op::SliceCols { x, start }))
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("stack_rows of zero tensors".into()));
        };
        let cols = self.shape(first).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.shape(p);
            if c != cols {
                return Err(Error::shape("stack_rows", &[cols], &[c]));
            }
            rows += r;
            out.extend_from_slice(self.value(p));
        }
        Ok(self.push(rows, cols, out, Op::StackRows(parts.to_vec())))
    }

    /// Selects rows `ids` (repeats allowed). Gradients scatter back onto the
    /// selected rows only.
    pub fn gather_rows(&mut self, x: Var, ids: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(x);
        let xs = self.value(x);
        let mut out = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if id >= r {
                return Err(Error::Index {
                    what: "gather_rows rows",
                    index: id,
                    size: r,
                });
            }
            out.extend_from_slice(&xs[id * c..(id + 1) * c]);
        }
        Ok(self.push(
            ids.len(),
            c,
            out,
            Op::GatherRows {
                x,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        self.gather_rows(x, &[i])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    /// `log Σ exp(x)` over all entries, max-shifted.
    pub fn logsumexp(&mut self, x: Var) -> Result<Var> {
        if self.value(x).is_empty() {
            return Err(Error::Contract("logsumexp of an empty tensor".into()));
        }
        let v = kernels::logsumexp(self.value(x));
        Ok(self.push(1, 1, vec![v], Op::LogSumExp(x)))
    }

    /// Gathers the entries at `(row, col)` coordinates into a `1×k` row.
    pub fn pick(&mut self, x: Var, coords: &[(usize, usize)]) -> Result<Var> {
        let (r, c) = self.shape(x);
        let mut idx = Vec::with_capacity(coords.len());
        for &(i, j) in coords {
            if i >= r || j >= c {
                return Err(Error::Index {
                    what: "pick coordinates",
                    index: i * c + j,
                    size: r * c,
                });
            }
            idx.push(i * c + j);
        }
        let xs = self.value(x);
        let out: Vec<f64> = idx.iter().map(|&k| xs[k]).collect();
        Ok(self.push(1, idx.len(), out, Op::Pick { x, idx }))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let (r, c) = self.shape(x);
        if mask.len() != r * c {
            return Err(Error::shape("mask", &[r, c], &[mask.len()]));
        }
        let out = self.value(x).iter().zip(&mask).map(|(a, m)| a * m).collect();
        Ok(self.push(r, c, out, Op::Mask { x, mask }))
    }

    /// Log partition function of a linear-chain CRF. `emissions` is `n×L`;
    /// `transitions` is `(L+2)×(L+2)` with START = L and STOP = L+1.
    pub fn crf_log_partition(&mut self, emissions: Var, transitions: Var) -> Result<Var> {
        let (n, l) = self.shape(emissions);
        let (tr, tc) = self.shape(transitions);
        if tr != l + 2 || tc != l + 2 {
            return Err(Error::shape("crf_log_partition", &[l + 2, l + 2], &[tr, tc]));
        }
        if n == 0 {
            return Err(Error::Contract("CRF over an empty sequence".into()));
        }
        let scores = CrfScores::new(self.value(emissions), self.value(transitions), n, l);
        let z = crf::log_partition(&scores);
        Ok(self.push(
            1,
            1,
            vec![z],
            Op::CrfLogZ {
                emissions,
                transitions,
            },
        ))
    }

    /// Back-propagates from the scalar `loss`, adding parameter gradients into
    /// `store`. Node gradients from this sweep are kept for [`Tape::grad`].
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let (r, c) = self.shape(loss);
        if r * c != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {r}×{c}"
            )));
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        // Parameter gradients go straight into the store.
        fn slot<'g>(
            grads: &'g mut [Option<Vec<f64>>],
            store: &'g mut ParamStore,
            nodes: &[Node],
            v: Var,
        ) -> &'g mut [f64] {
            if let Op::Param(id) = nodes[v.0].op {
                return store.get_mut(id).grad_mut();
            }
            let n = nodes[v.0].value.len();
            grads[v.0].get_or_insert_with(|| vec![0.0; n])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let dst = store.get_mut(*id).grad_mut();
                    dst.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = (nodes[a.0].rows, nodes[a.0].cols);
                    let p = nodes[b.0].cols;
                    let av = Arc::clone(&nodes[a.0].value);
                    let bv = Arc::clone(&nodes[b.0].value);
                    kernels::matmul_bt_acc(&g, &bv, m, p, k, slot(&mut grads, store, nodes, *a));
                    kernels::matmul_tn_acc(&av, &g, m, k, p, slot(&mut grads, store, nodes, *b));
                }
                Op::MatMulBT(a, b) => {
                    let (m, k) = (nodes[a.0].rows, nodes[a.0].cols);
                    let p = nodes[b.0].rows;
                    let av = Arc::clone(&nodes[a.0].value);
                    let bv = Arc::clone(&nodes[b.0].value);
                    kernels::matmul_acc(&g, &bv, m, p, k, slot(&mut grads, store, nodes, *a));
                    kernels::matmul_tn_acc(&g, &av, m, p, k, slot(&mut grads, store, nodes, *b));
                }
                Op::Add(a, b) => {
                    kernels::axpy(1.0, &g, slot(&mut grads, store, nodes, *a));
                    kernels::axpy(1.0, &g, slot(&mut grads, store, nodes, *b));
                }
                Op::Sub(a, b) => {
                    kernels::axpy(1.0, &g, slot(&mut grads, store, nodes, *a));
                    kernels::axpy(-1.0, &g, slot(&mut grads, store, nodes, *b));
                }
                Op::AddRow(a, row) => {
                    kernels::axpy(1.0, &g, slot(&mut grads, store, nodes, *a));
                    let dr = slot(&mut grads, store, nodes, *row);
                    for chunk in g.chunks_exact(node.cols) {
                        kernels::axpy(1.0, chunk, dr);
                    }
                }
                Op::Mul(a, b) => {
                    let av = Arc::clone(&nodes[a.0].value);
                    let bv = Arc::clone(&nodes[b.0].value);
                    let da = slot(&mut grads, store, nodes, *a);
                    for ((d, gi), y) in da.iter_mut().zip(&g).zip(bv.iter()) {
                        *d += gi * y;
                    }
                    let db = slot(&mut grads, store, nodes, *b);
                    for ((d, gi), x) in db.iter_mut().zip(&g).zip(av.iter()) {
                        *d += gi * x;
                    }
                }
                Op::Scale(a, s) => kernels::axpy(*s, &g, slot(&mut grads, store, nodes, *a)),
                Op::Unary(kind, x) => {
                    let y = &node.value;
                    let xv = Arc::clone(&nodes[x.0].value);
                    let dx = slot(&mut grads, store, nodes, *x);
                    for k in 0..dx.len() {
                        let d = match kind {
                            Unary::Sigmoid => y[k] * (1.0 - y[k]),
                            Unary::Tanh => 1.0 - y[k] * y[k],
                            Unary::Exp => y[k],
                            Unary::Log => 1.0 / xv[k],
                        };
                        dx[k] += g[k] * d;
                    }
                }
                Op::SoftmaxRows(x) => {
                    let c = node.cols;
                    let dx = slot(&mut grads, store, nodes, *x);
                    for ((y, gr), d) in node
                        .value
                        .chunks_exact(c)
                        .zip(g.chunks_exact(c))
                        .zip(dx.chunks_exact_mut(c))
                    {
                        let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for k in 0..c {
                            d[k] += y[k] * (gr[k] - dot);
                        }
                    }
                }
                Op::LogSoftmaxRows(x) => {
                    let c = node.cols;
                    let dx = slot(&mut grads, store, nodes, *x);
                    for ((y, gr), d) in node
                        .value
                        .chunks_exact(c)
                        .zip(g.chunks_exact(c))
                        .zip(dx.chunks_exact_mut(c))
                    {
                        let total: f64 = gr.iter().sum();
                        for k in 0..c {
                            d[k] += gr[k] - y[k].exp() * total;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = nodes[p.0].cols;
                        let dp = slot(&mut grads, store, nodes, *p);
                        for (row, d) in g.chunks_exact(node.cols).zip(dp.chunks_exact_mut(pc)) {
                            kernels::axpy(1.0, &row[offset..offset + pc], d);
                        }
                        offset += pc;
                    }
                }
                Op::SliceCols { x, start } => {
                    let xc = nodes[x.0].cols;
                    let len = node.cols;
                    let dx = slot(&mut grads, store, nodes, *x);
                    for (row, d) in g.chunks_exact(len).zip(dx.chunks_exact_mut(xc)) {
                        kernels::axpy(1.0, row, &mut d[*start..*start + len]);
                    }
                }
                Op::StackRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = nodes[p.0].value.len();
                        kernels::axpy(1.0, &g[offset..offset + n], slot(&mut grads, store, nodes, *p));
                        offset += n;
                    }
                }
                Op::GatherRows { x, ids } => {
                    let c = node.cols;
                    let dx = slot(&mut grads, store, nodes, *x);
                    for (row, &id) in g.chunks_exact(c).zip(ids) {
                        kernels::axpy(1.0, row, &mut dx[id * c..(id + 1) * c]);
                    }
                }
                Op::Sum(x) => {
                    let dx = slot(&mut grads, store, nodes, *x);
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::LogSumExp(x) => {
                    let xv = Arc::clone(&nodes[x.0].value);
                    let z = node.value[0];
                    let dx = slot(&mut grads, store, nodes, *x);
                    for (d, v) in dx.iter_mut().zip(xv.iter()) {
                        *d += g[0] * (v - z).exp();
                    }
                }
                Op::Pick { x, idx } => {
                    let dx = slot(&mut grads, store, nodes, *x);
                    for (gi, &k) in g.iter().zip(idx) {
                        dx[k] += gi;
                    }
                }
                Op::Mask { x, mask } => {
                    let dx = slot(&mut grads, store, nodes, *x);
                    for ((d, gi), m) in dx.iter_mut().zip(&g).zip(mask) {
                        *d += gi * m;
                    }
                }
                Op::CrfLogZ {
                    emissions,
                    transitions,
                } => {
                    let (n, l) = (nodes[emissions.0].rows, nodes[emissions.0].cols);
                    let scores = CrfScores::new(
                        &nodes[emissions.0].value,
                        &nodes[transitions.0].value,
                        n,
                        l,
                    );
                    let m = crf::marginals(&scores);
                    kernels::axpy(g[0], &m.unary, slot(&mut grads, store, nodes, *emissions));
                    kernels::axpy(g[0], &m.transitions, slot(&mut grads, store, nodes, *transitions));
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let s = tape.sum(x);
        tape.backward(s, &mut store).unwrap();
        assert_eq!(store.get(id).grad().unwrap(), &[1.0; 6]);
    }

    #[test]
    fn second_backward_doubles() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![0.3, -0.7]));
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let y = tape.tanh(x);
        let s = tape.sum(y);
        tape.backward(s, &mut store).unwrap();
        let once = store.get(id).grad().unwrap().to_vec();
        tape.backward(s, &mut store).unwrap();
        let twice = store.get(id).grad().unwrap();
        for (a, b) in once.iter().zip(twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        assert!(matches!(
            tape.backward(x, &mut store),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn unreachable_params_keep_zero_grad() {
        let mut store = ParamStore::new();
        let used = store.add("a", Tensor::vector(vec![1.0]));
        let unused = store.add("b", Tensor::vector(vec![1.0]));
        let mut tape = Tape::new();
        let a = tape.param(&store, used);
        let _b = tape.param(&store, unused);
        let s = tape.sum(a);
        tape.backward(s, &mut store).unwrap();
        assert!(store
            .get(unused)
            .grad()
            .is_none_or(|g| g.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // f(x) = g(x) + g(x) with g = sum(sigmoid(x)): grad f = 2 grad g.
        let x0 = vec![0.2, -0.4, 0.9];
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(x0));
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let s = tape.sigmoid(x);
        let g = tape.sum(s);
        tape.backward(g, &mut store).unwrap();
        let single = store.get(id).grad().unwrap().to_vec();
        store.zero_grad();
        let f = tape.add(g, g).unwrap();
        tape.backward(f, &mut store).unwrap();
        for (a, b) in single.iter().zip(store.get(id).grad().unwrap()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn log_domain_error() {
        let mut tape = Tape::new();
        let x = tape.constant(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(tape.log(x), Err(Error::Domain { .. })));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(2, 3, vec![0.0; 6]).unwrap();
        let b = tape.constant(2, 2, vec![0.0; 4]).unwrap();
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[2, 2]"), "{err}");
    }
}
