//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Nodes
//! are appended in evaluation order, so the tape is topologically sorted by
//! construction and [`Tape::backward`] only has to walk it in reverse.
//!
//! ```
//! use tagnn::{Tape, Tensor};
//!
//! let x = Tensor::<f64>::scalar(3.0);
//! let mut tape = Tape::new();
//! let xv = tape.param(&x);
//! let y = tape.mul(xv, xv).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(xv).unwrap().item(), 6.0);
//! ```
//!
//! Leaves can borrow their values (`param`, `input`) so that large tables
//! such as the item embeddings are never copied onto the tape.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    RepeatRows(Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Scale(Var, T),
    Log(Var, T),
    Softmax(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SumCols(Var),
    Sum(Var),
    Pick(Var, usize),
}

struct Node<'a, T: Scalar> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recorded computation. Single-writer; build one per forward pass.
pub struct Tape<'a, T: Scalar = f32> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every trainable leaf.
#[derive(Debug)]
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

/// Reduces a gradient back to the shape of a broadcast scalar operand.
fn unbroadcast<T: Scalar>(grad: Tensor<T>, like: &Tensor<T>) -> Tensor<T> {
    if like.len() == 1 && grad.len() != 1 {
        Tensor::new(like.shape().to_vec(), vec![grad.sum()]).expect("scalar shape")
    } else {
        grad
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    fn requires(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn leaf(&mut self, value: Cow<'a, Tensor<T>>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf borrowing its value.
    pub fn param(&mut self, value: &'a Tensor<T>) -> Var {
        self.leaf(Cow::Borrowed(value), true)
    }

    /// Non-trainable leaf borrowing its value.
    pub fn input(&mut self, value: &'a Tensor<T>) -> Var {
        self.leaf(Cow::Borrowed(value), false)
    }

    /// Non-trainable owned leaf.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(Cow::Owned(value), false)
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
        inputs: &[Var],
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: name.to_string(),
            });
        }
        let requires_grad = inputs.iter().any(|&v| self.requires(v));
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let out = if x.shape() == y.shape() {
            x.zip_map(y, f)
        } else if y.len() == 1 {
            let s = y.item();
            x.map(|v| f(v, s))
        } else if x.len() == 1 {
            let s = x.item();
            y.map(|v| f(s, v))
        } else {
            return Err(Error::Dimension {
                op: name,
                left: x.shape().to_vec(),
                right: y.shape().to_vec(),
            });
        };
        self.push(name, out, op, &[a, b])
    }

    /// Elementwise sum; either operand may be a one-element scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `1 × c` row to every row of an `r × c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        let cols = x.cols();
        if r.len() != cols {
            return Err(Error::Dimension {
                op: "add_row",
                left: x.shape().to_vec(),
                right: r.shape().to_vec(),
            });
        }
        let mut out = x.clone().reshape(vec![x.rows(), cols])?;
        for chunk in out.data_mut().chunks_mut(cols) {
            for (o, &b) in chunk.iter_mut().zip(r.data()) {
                *o = *o + b;
            }
        }
        self.push("add_row", out, Op::AddRow(a, row), &[a, row])
    }

    /// Stacks a single row `n` times.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let x = self.value(a);
        let cols = x.len();
        let mut data = Vec::with_capacity(n * cols);
        for _ in 0..n {
            data.extend_from_slice(x.data());
        }
        let out = Tensor::new(vec![n, cols], data)?;
        self.push("repeat_rows", out, Op::RepeatRows(a), &[a])
    }

    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| T::one() - v);
        self.push("one_minus", out, Op::OneMinus(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| {
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        });
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(T::tanh);
        self.push("tanh", out, Op::Tanh(a), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Result<Var> {
        let out = self.value(a).map(|v| v * factor);
        self.push("scale", out, Op::Scale(a, factor), &[a])
    }

    /// Natural log with the argument clamped below at `floor`.
    pub fn log_clamped(&mut self, a: Var, floor: T) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(floor).ln());
        self.push("log", out, Op::Log(a, floor), &[a])
    }

    /// Row-wise softmax over the last axis.
    ///
    /// `mask`, when given, has one flag per column (shared by all rows) or
    /// one per element. Masked entries come out exactly zero. A row with
    /// every entry masked is rejected.
    pub fn softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.dims2();
        if cols == 0 {
            return Err(Error::Degenerate("softmax over an empty axis".into()));
        }
        if let Some(m) = mask {
            if m.len() != cols && m.len() != rows * cols {
                return Err(Error::Dimension {
                    op: "softmax",
                    left: x.shape().to_vec(),
                    right: vec![m.len()],
                });
            }
        }
        let keep = |r: usize, c: usize| match mask {
            None => true,
            Some(m) if m.len() == cols => m[c],
            Some(m) => m[r * cols + c],
        };
        let mut out = vec![T::zero(); rows * cols];
        for r in 0..rows {
            let row = x.row_slice(r);
            let mut max = T::neg_infinity();
            for (c, &v) in row.iter().enumerate() {
                if keep(r, c) && v > max {
                    max = v;
                }
            }
            if max == T::neg_infinity() {
                return Err(Error::Degenerate(format!(
                    "softmax row {r} is fully masked"
                )));
            }
            let dst = &mut out[r * cols..(r + 1) * cols];
            let mut total = T::zero();
            for (c, (&v, o)) in row.iter().zip(dst.iter_mut()).enumerate() {
                if keep(r, c) {
                    *o = (v - max).exp();
                    total = total + *o;
                }
            }
            for o in dst.iter_mut() {
                *o = *o / total;
            }
        }
        let out = Tensor::new(x.shape().to_vec(), out)?;
        self.push("softmax", out, Op::Softmax(a), &[a])
    }

    /// Selects rows by index (embedding lookup).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.dims2();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(Error::Contract(format!(
                    "gather_rows index {i} out of range for {rows} rows"
                )));
            }
            data.extend_from_slice(x.row_slice(i));
        }
        let out = Tensor::new(vec![indices.len(), cols], data)?;
        self.push(
            "gather_rows",
            out,
            Op::GatherRows(a, indices.to_vec()),
            &[a],
        )
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.dims2();
        if start > end || end > cols {
            return Err(Error::Dimension {
                op: "slice_cols",
                left: x.shape().to_vec(),
                right: vec![start, end],
            });
        }
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&x.row_slice(r)[start..end]);
        }
        let out = Tensor::new(vec![rows, end - start], data)?;
        self.push("slice_cols", out, Op::SliceCols(a, start), &[a])
    }

    /// Row sums: `r × c → r × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let sums = (0..x.rows())
            .map(|r| x.row_slice(r).iter().fold(T::zero(), |acc, &v| acc + v))
            .collect();
        self.push("sum_cols", Tensor::column(sums), Op::SumCols(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a), &[a])
    }

    /// Extracts one element (flat row-major index) as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let x = self.value(a);
        if index >= x.len() {
            return Err(Error::Contract(format!(
                "pick index {index} out of range for {} elements",
                x.len()
            )));
        }
        let out = Tensor::scalar(x.data()[index]);
        self.push("pick", out, Op::Pick(a, index), &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Every trainable leaf gets an entry; leaves the loss does not depend
    /// on receive zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let y = &*node.value;
            let mut send = |var: Var, contrib: Tensor<T>| {
                if !self.requires(var) {
                    return;
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.requires(*a) {
                        send(*a, g.matmul(&self.value(*b).transpose())?);
                    }
                    if self.requires(*b) {
                        send(*b, self.value(*a).transpose().matmul(&g)?);
                    }
                }
                Op::Transpose(a) => {
                    let t = g.transpose().reshape(self.value(*a).shape().to_vec())?;
                    send(*a, t);
                }
                Op::Add(a, b) => {
                    send(*a, unbroadcast(g.clone(), self.value(*a)));
                    send(*b, unbroadcast(g, self.value(*b)));
                }
                Op::Sub(a, b) => {
                    send(*a, unbroadcast(g.clone(), self.value(*a)));
                    send(*b, unbroadcast(g.map(|v| -v), self.value(*b)));
                }
                Op::Mul(a, b) => {
                    let (x, z) = (self.value(*a), self.value(*b));
                    let times = |other: &Tensor<T>| {
                        if other.len() == 1 {
                            let s = other.item();
                            g.map(|v| v * s)
                        } else {
                            g.zip_map(other, |u, v| u * v)
                        }
                    };
                    if self.requires(*a) {
                        send(*a, unbroadcast(times(z), x));
                    }
                    if self.requires(*b) {
                        send(*b, unbroadcast(times(x), z));
                    }
                }
                Op::AddRow(a, row) => {
                    let cols = g.cols();
                    let mut acc = vec![T::zero(); cols];
                    for chunk in g.data().chunks(cols) {
                        for (s, &v) in acc.iter_mut().zip(chunk) {
                            *s = *s + v;
                        }
                    }
                    let row_shape = self.value(*row).shape().to_vec();
                    let a_shape = self.value(*a).shape().to_vec();
                    send(*row, Tensor::new(row_shape, acc)?);
                    send(*a, g.reshape(a_shape)?);
                }
                Op::RepeatRows(a) => {
                    let cols = g.cols();
                    let mut acc = vec![T::zero(); cols];
                    for chunk in g.data().chunks(cols) {
                        for (s, &v) in acc.iter_mut().zip(chunk) {
                            *s = *s + v;
                        }
                    }
                    send(*a, Tensor::new(self.value(*a).shape().to_vec(), acc)?);
                }
                Op::OneMinus(a) => send(*a, g.map(|v| -v)),
                Op::Sigmoid(a) => send(*a, g.zip_map(y, |u, s| u * s * (T::one() - s))),
                Op::Tanh(a) => send(*a, g.zip_map(y, |u, t| u * (T::one() - t * t))),
                Op::Scale(a, f) => {
                    let f = *f;
                    send(*a, g.map(|v| v * f));
                }
                Op::Log(a, floor) => {
                    let floor = *floor;
                    let x = self.value(*a);
                    send(
                        *a,
                        g.zip_map(x, |u, v| if v >= floor { u / v } else { T::zero() }),
                    );
                }
                Op::Softmax(a) => {
                    let cols = y.cols();
                    let mut out = vec![T::zero(); y.len()];
                    for (r, dst) in out.chunks_mut(cols).enumerate() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot = yr
                            .iter()
                            .zip(gr)
                            .fold(T::zero(), |acc, (&p, &q)| acc + p * q);
                        for ((d, &p), &q) in dst.iter_mut().zip(yr).zip(gr) {
                            *d = p * (q - dot);
                        }
                    }
                    send(*a, Tensor::new(y.shape().to_vec(), out)?);
                }
                Op::GatherRows(a, indices) => {
                    let src = self.value(*a);
                    let cols = src.cols();
                    let mut acc = Tensor::zeros(src.shape());
                    for (k, &i) in indices.iter().enumerate() {
                        let dst = &mut acc.data_mut()[i * cols..(i + 1) * cols];
                        for (d, &v) in dst.iter_mut().zip(g.row_slice(k)) {
                            *d = *d + v;
                        }
                    }
                    send(*a, acc);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.value(p).cols();
                        if self.requires(p) {
                            let mut data = Vec::with_capacity(rows * pc);
                            for r in 0..rows {
                                data.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                            }
                            send(p, Tensor::new(self.value(p).shape().to_vec(), data)?);
                        }
                        offset += pc;
                    }
                }
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let (rows, cols) = x.dims2();
                    let width = g.cols();
                    let mut t = Tensor::zeros(x.shape());
                    for r in 0..rows {
                        t.data_mut()[r * cols + start..r * cols + start + width]
                            .copy_from_slice(g.row_slice(r));
                    }
                    send(*a, t);
                }
                Op::SumCols(a) => {
                    let x = self.value(*a);
                    let cols = x.cols();
                    let mut data = Vec::with_capacity(x.len());
                    for &v in g.data() {
                        data.extend(std::iter::repeat_n(v, cols));
                    }
                    send(*a, Tensor::new(x.shape().to_vec(), data)?);
                }
                Op::Sum(a) => {
                    let s = g.item();
                    send(*a, Tensor::full(self.value(*a).shape(), s));
                }
                Op::Pick(a, index) => {
                    let mut t = Tensor::zeros(self.value(*a).shape());
                    t.data_mut()[*index] = g.item();
                    send(*a, t);
                }
            }
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                if grads[idx].is_none() {
                    grads[idx] = Some(Tensor::zeros(node.value.shape()));
                }
            } else {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_derivative() {
        let x = Tensor::<f64>::scalar(3.0);
        let mut tape = Tape::new();
        let xv = tape.param(&x);
        let y = tape.mul(xv, xv).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(xv).unwrap().item(), 6.0);
    }

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        let x = Tensor::<f64>::zeros(&[1, 3]);
        let mut tape = Tape::new();
        let xv = tape.param(&x);
        let s = tape.sigmoid(xv).unwrap();
        let t = tape.tanh(xv).unwrap();
        assert!(tape.value(s).data().iter().all(|&v| v == 0.5));
        assert!(tape.value(t).data().iter().all(|&v| v == 0.0));
        let total = tape.sum(s).unwrap();
        let g = tape.backward(total).unwrap();
        assert!(g.get(xv).unwrap().data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn elementwise_mul() {
        let a = Tensor::<f32>::row(vec![1.0, 2.0]);
        let b = Tensor::row(vec![3.0, 4.0]);
        let mut tape = Tape::new();
        let (av, bv) = (tape.input(&a), tape.input(&b));
        let c = tape.mul(av, bv).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 8.0]);
    }

    #[test]
    fn elementwise_shape_mismatch() {
        let a = Tensor::<f32>::row(vec![1.0, 2.0]);
        let b = Tensor::row(vec![3.0, 4.0, 5.0]);
        let mut tape = Tape::new();
        let (av, bv) = (tape.input(&a), tape.input(&b));
        assert!(matches!(tape.add(av, bv), Err(Error::Dimension { .. })));
    }

    #[test]
    fn softmax_examples() {
        let x = Tensor::<f64>::row(vec![0.0, 0.0]);
        let y = Tensor::<f64>::row(vec![1.0, 2.0]);
        let mut tape = Tape::new();
        let (xv, yv) = (tape.input(&x), tape.input(&y));
        let sx = tape.softmax(xv, None).unwrap();
        assert_eq!(tape.value(sx).data(), &[0.5, 0.5]);
        let sy = tape.softmax(yv, None).unwrap();
        assert_abs_diff_eq!(tape.value(sy).data()[0], 0.2689, epsilon = 1e-4);
        assert_abs_diff_eq!(tape.value(sy).data()[1], 0.7311, epsilon = 1e-4);
        let masked = tape.softmax(yv, Some(&[true, false])).unwrap();
        assert_eq!(tape.value(masked).data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_fully_masked_row_is_degenerate() {
        let x = Tensor::<f64>::row(vec![1.0, 2.0]);
        let mut tape = Tape::new();
        let xv = tape.input(&x);
        assert!(matches!(
            tape.softmax(xv, Some(&[false, false])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn matmul_gradient_of_sum() {
        let a = Tensor::<f64>::row(vec![1.0, 1.0]);
        let b = Tensor::column(vec![2.0, 5.0]);
        let mut tape = Tape::new();
        let (av, bv) = (tape.param(&a), tape.param(&b));
        let p = tape.matmul(av, bv).unwrap();
        let s = tape.sum(p).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(av).unwrap().data(), &[2.0, 5.0]);
        assert_eq!(g.get(bv).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let a = Tensor::<f64>::row(vec![1.0, 1.0]);
        let mut tape = Tape::new();
        let av = tape.param(&a);
        assert!(matches!(tape.backward(av), Err(Error::Contract(_))));
    }

    #[test]
    fn unreachable_param_gets_zero_gradient() {
        let a = Tensor::<f64>::row(vec![1.0, 2.0]);
        let b = Tensor::<f64>::row(vec![3.0]);
        let mut tape = Tape::new();
        let av = tape.param(&a);
        let bv = tape.param(&b);
        let s = tape.sum(av).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(bv).unwrap().data(), &[0.0]);
    }

    #[test]
    fn non_finite_output_names_op() {
        let a = Tensor::<f32>::row(vec![f32::MAX]);
        let mut tape = Tape::new();
        let av = tape.input(&a);
        let err = tape.add(av, av).unwrap_err();
        assert!(err.to_string().contains("add"), "{err}");
    }
}
