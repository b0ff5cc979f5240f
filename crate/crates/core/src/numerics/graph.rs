//! Dynamically recorded tape for reverse-mode differentiation.
//!
//! Every op appends a node holding its forward value; nodes are created in
//! topological order, so the backward pass is a single reverse sweep.
//!
//! ```
//! use sgnet::numerics::{Graph, ParamStore, Tensor};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", Tensor::vector(vec![1.0, -2.0]));
//! let mut g = Graph::new();
//! let x = g.param(&store, w);
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! let grads = g.backward(loss);
//! g.accumulate(&grads, &mut store);
//! assert_eq!(store.get(w).gradient.data(), &[2.0, -4.0]);
//! ```

use std::collections::HashMap;
use std::rc::Rc;

use super::ops::{self, BitMatrix, LayerNormCache};
use super::{NumericsError, ParamId, ParamStore, Tensor};

/// Node handle on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Transpose(Var),
    Softmax(Var),
    MaskedSoftmax(Var),
    MaskMultiply(Var, Rc<BitMatrix>),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        cache: LayerNormCache,
    },
    Gelu(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor,
    },
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    Lerp(Var, Var, f64),
    Sum(Var),
    Mean(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients(Vec<Option<Tensor>>);

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0[v.0].as_ref()
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NumericsError {
    NumericsError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Leaf bound to a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumericsError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    /// Adds the vector `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, NumericsError> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.len() != x.cols() {
            return Err(shape_err("add_row", x, b));
        }
        let mut value = x.clone();
        for i in 0..value.rows() {
            for (v, &bv) in value.row_mut(i).iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        Ok(self.push(value, Op::AddRow(a, bias)))
    }

    /// `a · W + b` for a `[n×d_in]` input.
    pub fn linear(&mut self, a: Var, weight: Var, bias: Option<Var>) -> Result<Var, NumericsError> {
        let y = self.matmul(a, weight)?;
        match bias {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = ops::softmax_rows(self.value(a));
        self.push(value, Op::Softmax(a))
    }

    pub fn masked_softmax_rows(&mut self, a: Var, mask: &BitMatrix) -> Result<Var, NumericsError> {
        let value = ops::masked_softmax_rows(self.value(a), mask)?;
        Ok(self.push(value, Op::MaskedSoftmax(a)))
    }

    /// Elementwise product with a 0/1 mask.
    pub fn mask_multiply(&mut self, a: Var, mask: Rc<BitMatrix>) -> Result<Var, NumericsError> {
        let x = self.value(a);
        if x.rows() != mask.rows() || x.cols() != mask.cols() {
            return Err(shape_err("mask_multiply", x, &mask.to_tensor()));
        }
        let mut value = x.clone();
        for (v, &b) in value.data_mut().iter_mut().zip(mask.bits()) {
            if !b {
                *v *= 0.0;
            }
        }
        Ok(self.push(value, Op::MaskMultiply(a, mask)))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, NumericsError> {
        let (value, cache) = ops::layer_norm(
            self.value(x),
            self.value(gain),
            self.value(bias),
            ops::LAYER_NORM_EPS,
        )?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                cache,
            },
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = ops::gelu(self.value(a));
        self.push(value, Op::Gelu(a))
    }

    /// Mean cross-entropy over rows; a scalar node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, NumericsError> {
        let (loss, probs) = ops::cross_entropy(self.value(logits), targets)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Selects rows by index (embedding lookup, pooled-token selection).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let d = x.cols();
        if let Some(&bad) = indices.iter().find(|&&i| i >= x.rows()) {
            return Err(NumericsError::IndexOutOfRange {
                index: bad,
                len: x.rows(),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(x.row(i));
        }
        let value = Tensor::matrix(indices.len(), d, data)?;
        Ok(self.push(value, Op::GatherRows(a, indices.to_vec())))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows || t.shape().len() != 2 {
                return Err(shape_err("concat_cols", self.value(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::matrix(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// `alpha·a + (1−alpha)·b`; the endpoints return an exact copy of one side.
    pub fn lerp(&mut self, a: Var, b: Var, alpha: f64) -> Result<Var, NumericsError> {
        self.same_shape("lerp", a, b)?;
        let value = if alpha == 1.0 {
            self.value(a).clone()
        } else if alpha == 0.0 {
            self.value(b).clone()
        } else {
            self.value(a)
                .zip_map(self.value(b), |x, y| alpha * x + (1.0 - alpha) * y)
        };
        Ok(self.push(value, Op::Lerp(a, b, alpha)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let value = Tensor::scalar(x.sum() / x.len() as f64);
        self.push(value, Op::Mean(a))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=output.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Param => {
                    grads[idx] = Some(dy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = dy.matmul(&self.value(*b).transpose()).expect("shape");
                    let db = self.value(*a).transpose().matmul(&dy).expect("shape");
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, dy.clone());
                    acc(&mut grads, *b, dy);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, dy.map(|g| -g));
                    acc(&mut grads, *a, dy);
                }
                Op::Mul(a, b) => {
                    let da = dy.zip_map(self.value(*b), |g, y| g * y);
                    let db = dy.zip_map(self.value(*a), |g, x| g * x);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, dy.map(|g| g * f)),
                Op::AddRow(a, bias) => {
                    let mut db = Tensor::zeros(self.value(*bias).shape());
                    for i in 0..dy.rows() {
                        for (d, &g) in db.data_mut().iter_mut().zip(dy.row(i)) {
                            *d += g;
                        }
                    }
                    acc(&mut grads, *bias, db);
                    acc(&mut grads, *a, dy);
                }
                Op::Transpose(a) => acc(&mut grads, *a, dy.transpose()),
                Op::Softmax(a) | Op::MaskedSoftmax(a) => {
                    acc(&mut grads, *a, ops::softmax_rows_backward(&node.value, &dy))
                }
                Op::MaskMultiply(a, mask) => {
                    let mut da = dy;
                    for (d, &b) in da.data_mut().iter_mut().zip(mask.bits()) {
                        if !b {
                            *d *= 0.0;
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    cache,
                } => {
                    let (dx, dg, db) = ops::layer_norm_backward(cache, self.value(*gain), &dy);
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gain, dg);
                    acc(&mut grads, *bias, db);
                }
                Op::Gelu(a) => acc(&mut grads, *a, ops::gelu_backward(self.value(*a), &dy)),
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let d = ops::cross_entropy_backward(probs, targets, dy.item());
                    acc(&mut grads, *logits, d);
                }
                Op::GatherRows(a, indices) => {
                    let mut da = Tensor::zeros(self.value(*a).shape());
                    for (k, &i) in indices.iter().enumerate() {
                        for (d, &g) in da.row_mut(i).iter_mut().zip(dy.row(k)) {
                            *d += g;
                        }
                    }
                    acc(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = (self.value(p).rows(), self.value(p).cols());
                        let mut dp = Vec::with_capacity(r * c);
                        for i in 0..r {
                            dp.extend_from_slice(&dy.row(i)[offset..offset + c]);
                        }
                        acc(&mut grads, p, Tensor::matrix(r, c, dp).expect("shape"));
                        offset += c;
                    }
                }
                Op::Lerp(a, b, alpha) => {
                    let (alpha, beta) = (*alpha, 1.0 - *alpha);
                    acc(&mut grads, *b, dy.map(|g| g * beta));
                    acc(&mut grads, *a, dy.map(|g| g * alpha));
                }
                Op::Sum(a) => {
                    let g = dy.item();
                    acc(&mut grads, *a, Tensor::full(self.value(*a).shape(), g));
                }
                Op::Mean(a) => {
                    let x = self.value(*a);
                    let g = dy.item() / x.len() as f64;
                    acc(&mut grads, *a, Tensor::full(x.shape(), g));
                }
            }
        }
        Gradients(grads)
    }

    /// Adds the gradients of parameter leaves into the store.
    pub fn accumulate(&self, grads: &Gradients, store: &mut ParamStore) {
        for (&id, &v) in &self.params {
            if let Some(g) = grads.get(v) {
                store.get_mut(id).gradient.add_assign(g);
            }
        }
    }

    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.params.get(&id).copied()
    }
}
