//! Primitive operations and the [`Backend`] abstraction.
//!
//! Model code is written once against [`Backend`]. [`Eager`] evaluates
//! immediately and is used for inference; [`Tape`](super::Tape) records each
//! call so a backward pass can produce gradients.

use std::sync::Arc;

use super::tensor::Tensor;

pub trait Backend {
    type Var: Clone;

    fn constant(&mut self, t: Tensor) -> Self::Var;
    fn value<'a>(&'a self, v: &'a Self::Var) -> &'a Tensor;

    fn matmul(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var;
    /// `a · bᵀ`
    fn matmul_t(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var;
    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var;
    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var;
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var;
    /// Adds a `1 × n` row to every row of `a`.
    fn add_row(&mut self, a: &Self::Var, row: &Self::Var) -> Self::Var;
    fn scale(&mut self, a: &Self::Var, c: f64) -> Self::Var;
    fn tanh(&mut self, a: &Self::Var) -> Self::Var;
    fn sigmoid(&mut self, a: &Self::Var) -> Self::Var;
    fn relu(&mut self, a: &Self::Var) -> Self::Var;
    fn concat_cols(&mut self, parts: &[Self::Var]) -> Self::Var;
    fn concat_rows(&mut self, parts: &[Self::Var]) -> Self::Var;
    fn slice_cols(&mut self, a: &Self::Var, start: usize, len: usize) -> Self::Var;
    /// Row lookup; `None` yields a zero row.
    fn gather_rows(&mut self, a: &Self::Var, idx: &[Option<usize>]) -> Self::Var;
    /// Sliding windows of `w` consecutive rows, each flattened into one row.
    fn unfold(&mut self, a: &Self::Var, w: usize) -> Self::Var;
    /// Column-wise max over rows, giving a `1 × n` row.
    fn max_pool_rows(&mut self, a: &Self::Var) -> Self::Var;
    fn softmax_rows(&mut self, a: &Self::Var) -> Self::Var;
    /// `log softmax(logits)_j` for a `1 × n` logits row, as a scalar.
    fn log_softmax_pick(&mut self, logits: &Self::Var, j: usize) -> Self::Var;
    fn sum_squares(&mut self, a: &Self::Var) -> Self::Var;
    fn sum(&mut self, a: &Self::Var) -> Self::Var;
}

/// Immediate evaluation without gradient bookkeeping.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eager;

impl Backend for Eager {
    type Var = Arc<Tensor>;

    fn constant(&mut self, t: Tensor) -> Self::Var {
        Arc::new(t)
    }
    fn value<'a>(&'a self, v: &'a Self::Var) -> &'a Tensor {
        v
    }
    fn matmul(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var {
        Arc::new(a.matmul(b))
    }
    fn matmul_t(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var {
        Arc::new(a.matmul_t(b))
    }
    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var {
        Arc::new(a.zip_map(b, |x, y| x + y))
    }
    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var {
        Arc::new(a.zip_map(b, |x, y| x - y))
    }
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Self::Var {
        Arc::new(a.zip_map(b, |x, y| x * y))
    }
    fn add_row(&mut self, a: &Self::Var, row: &Self::Var) -> Self::Var {
        Arc::new(add_row(a, row))
    }
    fn scale(&mut self, a: &Self::Var, c: f64) -> Self::Var {
        Arc::new(a.map(|x| c * x))
    }
    fn tanh(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(a.map(f64::tanh))
    }
    fn sigmoid(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(a.map(sigmoid))
    }
    fn relu(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(a.map(|x| x.max(0.0)))
    }
    fn concat_cols(&mut self, parts: &[Self::Var]) -> Self::Var {
        let refs: Vec<&Tensor> = parts.iter().map(|p| p.as_ref()).collect();
        Arc::new(concat_cols(&refs))
    }
    fn concat_rows(&mut self, parts: &[Self::Var]) -> Self::Var {
        let refs: Vec<&Tensor> = parts.iter().map(|p| p.as_ref()).collect();
        Arc::new(concat_rows(&refs))
    }
    fn slice_cols(&mut self, a: &Self::Var, start: usize, len: usize) -> Self::Var {
        Arc::new(slice_cols(a, start, len))
    }
    fn gather_rows(&mut self, a: &Self::Var, idx: &[Option<usize>]) -> Self::Var {
        Arc::new(gather_rows(a, idx))
    }
    fn unfold(&mut self, a: &Self::Var, w: usize) -> Self::Var {
        Arc::new(unfold(a, w))
    }
    fn max_pool_rows(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(max_pool_rows(a).0)
    }
    fn softmax_rows(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(softmax_rows(a))
    }
    fn log_softmax_pick(&mut self, logits: &Self::Var, j: usize) -> Self::Var {
        Arc::new(Tensor::scalar(log_softmax_pick(logits, j).0))
    }
    fn sum_squares(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(Tensor::scalar(a.sum_squares()))
    }
    fn sum(&mut self, a: &Self::Var) -> Self::Var {
        Arc::new(Tensor::scalar(a.sum()))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn add_row(a: &Tensor, row: &Tensor) -> Tensor {
    assert_eq!(row.rows(), 1, "add_row expects a single row");
    assert_eq!(a.cols(), row.cols(), "add_row width mismatch");
    let mut out = a.clone();
    for r in 0..out.rows() {
        for (d, &b) in out.row_mut(r).iter_mut().zip(row.data()) {
            *d += b;
        }
    }
    out
}

pub(crate) fn concat_cols(parts: &[&Tensor]) -> Tensor {
    let rows = parts.first().map_or(0, |p| p.rows());
    assert!(
        parts.iter().all(|p| p.rows() == rows),
        "concat_cols row mismatch"
    );
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut off = 0;
        let dst = out.row_mut(r);
        for p in parts {
            dst[off..off + p.cols()].copy_from_slice(p.row(r));
            off += p.cols();
        }
    }
    out
}

pub(crate) fn concat_rows(parts: &[&Tensor]) -> Tensor {
    let cols = parts.first().map_or(0, |p| p.cols());
    assert!(
        parts.iter().all(|p| p.cols() == cols),
        "concat_rows column mismatch"
    );
    let rows: usize = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::from_vec(rows, cols, data)
}

pub(crate) fn slice_cols(a: &Tensor, start: usize, len: usize) -> Tensor {
    assert!(start + len <= a.cols(), "slice_cols out of range");
    let mut out = Tensor::zeros(a.rows(), len);
    for r in 0..a.rows() {
        out.row_mut(r).copy_from_slice(&a.row(r)[start..start + len]);
    }
    out
}

pub(crate) fn gather_rows(a: &Tensor, idx: &[Option<usize>]) -> Tensor {
    let mut out = Tensor::zeros(idx.len(), a.cols());
    for (r, i) in idx.iter().enumerate() {
        if let Some(i) = *i {
            out.row_mut(r).copy_from_slice(a.row(i));
        }
    }
    out
}

pub(crate) fn unfold(a: &Tensor, w: usize) -> Tensor {
    assert!(w >= 1 && w <= a.rows(), "unfold window exceeds length");
    let positions = a.rows() - w + 1;
    let width = w * a.cols();
    let mut out = Tensor::zeros(positions, width);
    for p in 0..positions {
        out.row_mut(p)
            .copy_from_slice(&a.data()[p * a.cols()..(p + w) * a.cols()]);
    }
    out
}

/// Returns the pooled row and, per column, the row index holding the max
/// (first occurrence on ties).
pub(crate) fn max_pool_rows(a: &Tensor) -> (Tensor, Vec<usize>) {
    assert!(a.rows() > 0, "max_pool over zero rows");
    let mut arg = vec![0usize; a.cols()];
    let mut out = Tensor::row_vector(a.row(0).to_vec());
    for r in 1..a.rows() {
        for (c, &v) in a.row(r).iter().enumerate() {
            if v > out.data()[c] {
                out.data_mut()[c] = v;
                arg[c] = r;
            }
        }
    }
    (out, arg)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

pub(crate) fn softmax_rows(a: &Tensor) -> Tensor {
    let mut out = a.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Returns `log softmax(logits)_j` and the softmax probabilities.
pub(crate) fn log_softmax_pick(logits: &Tensor, j: usize) -> (f64, Tensor) {
    assert_eq!(logits.rows(), 1, "log_softmax_pick expects one row");
    let row = logits.data();
    let lse = log_sum_exp(row);
    let probs = logits.map(|v| (v - lse).exp());
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lp = if row[j] == max && max.is_finite() {
        // −ln(1 + Σ_{k≠j} e^{x_k − x_j}) keeps full precision near zero
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &v)| (v - max).exp())
            .sum();
        -rest.ln_1p()
    } else {
        row[j] - lse
    };
    (lp, probs)
}

