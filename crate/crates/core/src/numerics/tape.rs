//! Reverse-mode differentiation over the [`Backend`] primitives.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order; the backward pass walks it once from the end.

use super::ops::{self, Backend};
use super::tensor::Tensor;

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
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols(usize, usize),
    Gather(usize, Vec<Option<usize>>),
    Unfold(usize, usize),
    MaxPool(usize, Vec<usize>),
    Softmax(usize),
    LogSoftmaxPick(usize, usize, Tensor),
    SumSquares(usize),
    Sum(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; `None` if `v` does not
    /// influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
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

    /// Registers a differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }

    /// Backpropagates from the scalar `root`.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.val(root.0).len(), 1, "backward root must be a scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.val(*b));
                    let gb = self.val(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.matmul(self.val(*b));
                    let gb = g.t_matmul(self.val(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.val(*b), |d, y| d * y);
                    let gb = g.zip_map(self.val(*a), |d, x| d * x);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|v| c * v));
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |d, y| d * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |d, y| d * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(&node.value, |d, y| if y > 0.0 { d } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.val(p).cols();
                        accumulate(&mut grads, p, ops::slice_cols(&g, off, w));
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (r, c) = (self.val(p).rows(), self.val(p).cols());
                        let chunk = g.data()[off * c..(off + r) * c].to_vec();
                        accumulate(&mut grads, p, Tensor::from_vec(r, c, chunk));
                        off += r;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.val(*a);
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Gather(a, idx) => {
                    let src = self.val(*a);
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    for (r, i) in idx.iter().enumerate() {
                        if let Some(i) = *i {
                            for (d, &v) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Unfold(a, w) => {
                    let src = self.val(*a);
                    let c = src.cols();
                    let mut ga = Tensor::zeros(src.rows(), c);
                    for p in 0..g.rows() {
                        let dst = &mut ga.data_mut()[p * c..(p + w) * c];
                        for (d, &v) in dst.iter_mut().zip(g.row(p)) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::MaxPool(a, arg) => {
                    let src = self.val(*a);
                    let mut ga = Tensor::zeros(src.rows(), src.cols());
                    for (c, &r) in arg.iter().enumerate() {
                        ga.set(r, c, g.data()[c]);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let inner: f64 = yr.iter().zip(gr).map(|(p, d)| p * d).sum();
                        for (c, o) in ga.row_mut(r).iter_mut().enumerate() {
                            *o = yr[c] * (gr[c] - inner);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::LogSoftmaxPick(a, j, probs) => {
                    let d = g.item();
                    let mut ga = probs.map(|p| -d * p);
                    ga.data_mut()[*j] += d;
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumSquares(a) => {
                    let d = g.item();
                    accumulate(&mut grads, *a, self.val(*a).map(|x| 2.0 * d * x));
                }
                Op::Sum(a) => {
                    let src = self.val(*a);
                    accumulate(&mut grads, *a, Tensor::filled(src.rows(), src.cols(), g.item()));
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
    match &mut grads[i] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

impl Backend for Tape {
    type Var = Var;

    fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }
    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor {
        self.val(v.0)
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).matmul(self.val(b.0));
        self.push(v, Op::MatMul(a.0, b.0))
    }
    fn matmul_t(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).matmul_t(self.val(b.0));
        self.push(v, Op::MatMulT(a.0, b.0))
    }
    fn add(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).zip_map(self.val(b.0), |x, y| x + y);
        self.push(v, Op::Add(a.0, b.0))
    }
    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).zip_map(self.val(b.0), |x, y| x - y);
        self.push(v, Op::Sub(a.0, b.0))
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        let v = self.val(a.0).zip_map(self.val(b.0), |x, y| x * y);
        self.push(v, Op::Mul(a.0, b.0))
    }
    fn add_row(&mut self, a: &Var, row: &Var) -> Var {
        let v = ops::add_row(self.val(a.0), self.val(row.0));
        self.push(v, Op::AddRow(a.0, row.0))
    }
    fn scale(&mut self, a: &Var, c: f64) -> Var {
        let v = self.val(a.0).map(|x| c * x);
        self.push(v, Op::Scale(a.0, c))
    }
    fn tanh(&mut self, a: &Var) -> Var {
        let v = self.val(a.0).map(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }
    fn sigmoid(&mut self, a: &Var) -> Var {
        let v = self.val(a.0).map(ops::sigmoid);
        self.push(v, Op::Sigmoid(a.0))
    }
    fn relu(&mut self, a: &Var) -> Var {
        let v = self.val(a.0).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }
    fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.val(p.0)).collect();
        let v = ops::concat_cols(&refs);
        self.push(v, Op::ConcatCols(parts.iter().map(|p| p.0).collect()))
    }
    fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.val(p.0)).collect();
        let v = ops::concat_rows(&refs);
        self.push(v, Op::ConcatRows(parts.iter().map(|p| p.0).collect()))
    }
    fn slice_cols(&mut self, a: &Var, start: usize, len: usize) -> Var {
        let v = ops::slice_cols(self.val(a.0), start, len);
        self.push(v, Op::SliceCols(a.0, start))
    }
    fn gather_rows(&mut self, a: &Var, idx: &[Option<usize>]) -> Var {
        let v = ops::gather_rows(self.val(a.0), idx);
        self.push(v, Op::Gather(a.0, idx.to_vec()))
    }
    fn unfold(&mut self, a: &Var, w: usize) -> Var {
        let v = ops::unfold(self.val(a.0), w);
        self.push(v, Op::Unfold(a.0, w))
    }
    fn max_pool_rows(&mut self, a: &Var) -> Var {
        let (v, arg) = ops::max_pool_rows(self.val(a.0));
        self.push(v, Op::MaxPool(a.0, arg))
    }
    fn softmax_rows(&mut self, a: &Var) -> Var {
        let v = ops::softmax_rows(self.val(a.0));
        self.push(v, Op::Softmax(a.0))
    }
    fn log_softmax_pick(&mut self, logits: &Var, j: usize) -> Var {
        let (lp, probs) = ops::log_softmax_pick(self.val(logits.0), j);
        self.push(Tensor::scalar(lp), Op::LogSoftmaxPick(logits.0, j, probs))
    }
    fn sum_squares(&mut self, a: &Var) -> Var {
        let v = Tensor::scalar(self.val(a.0).sum_squares());
        self.push(v, Op::SumSquares(a.0))
    }
    fn sum(&mut self, a: &Var) -> Var {
        let v = Tensor::scalar(self.val(a.0).sum());
        self.push(v, Op::Sum(a.0))
    }
}
