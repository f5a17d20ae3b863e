//! Tape-based reverse-mode differentiation over [`Tensor2`] values.
//!
//! Every operation appends a node to the [`Tape`]; a node only ever refers to
//! nodes recorded before it, so the tape is already in topological order and
//! [`Tape::backward`] is a single reverse sweep.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{shape_err, NumericsError, Result, Shape};
use crate::tensor::Tensor2;

/// Backward rule for [`Tape::custom`]: `(upstream, inputs, output)` to one
/// gradient per input.
pub type BackwardFn = Box<dyn Fn(&Tensor2, &[Rc<Tensor2>], &Tensor2) -> Vec<Tensor2>>;

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    Transpose(usize),
    Scale(usize, f64),
    Offset(usize),
    OuterSum(usize, usize),
    MaskedSoftmax(usize),
    LogSoftmax(usize),
    Sigmoid(usize),
    Relu(usize),
    Elu(usize, f64),
    LeakyRelu(usize, f64),
    Exp(usize),
    Clamp(usize, f64, f64),
    ConcatCols(Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    Sum(usize),
    Mean(usize),
    MulConst(usize, Rc<Tensor2>),
    WeightedBce { logits: usize, target: Rc<Tensor2>, weights: Rc<Tensor2>, denom: f64 },
    Custom(Vec<usize>, BackwardFn),
}

struct Node {
    value: Rc<Tensor2>,
    op: Op,
    tracked: bool,
}

/// Record of a forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable leaf.
    pub fn param(&self, value: Tensor2) -> Var<'_> {
        self.push_leaf(Rc::new(value), true)
    }

    /// A differentiable leaf sharing storage with the caller.
    pub fn param_rc(&self, value: Rc<Tensor2>) -> Var<'_> {
        self.push_leaf(value, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor2) -> Var<'_> {
        self.push_leaf(Rc::new(value), false)
    }

    pub fn constant_rc(&self, value: Rc<Tensor2>) -> Var<'_> {
        self.push_leaf(value, false)
    }

    /// Records an op with a caller-supplied backward rule.
    pub fn custom<'t>(&'t self, inputs: &[Var<'t>], value: Tensor2, backward: BackwardFn) -> Var<'t> {
        let ids = inputs.iter().map(|v| v.id).collect::<Vec<_>>();
        let tracked = self.any_tracked(&ids);
        self.push(value, Op::Custom(ids, backward), tracked)
    }

    fn push_leaf(&self, value: Rc<Tensor2>, tracked: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op: Op::Leaf, tracked });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn push(&self, value: Tensor2, op: Op, tracked: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value: Rc::new(value), op, tracked });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn any_tracked(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].tracked)
    }

    fn value_of(&self, id: usize) -> Rc<Tensor2> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn is_tracked(&self, id: usize) -> bool {
        self.nodes.borrow()[id].tracked
    }

    fn unary(&self, x: usize, value: Tensor2, op: Op) -> Var<'_> {
        let tracked = self.is_tracked(x);
        self.push(value, op, tracked)
    }

    /// Reverse sweep from a 1x1 `loss`. Gradients accumulate over fan-out.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != (1, 1) {
            return Err(NumericsError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor2>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Tensor2::filled(1, 1, 1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let contributions = local_gradients(&nodes, node, &g);
            grads[id] = Some(g);
            for (input, contrib) in contributions {
                if !nodes[input].tracked {
                    continue;
                }
                match &mut grads[input] {
                    Some(acc) => acc.add_assign(&contrib)?,
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn arr(t: &Tensor2) -> &Array2<f64> {
    t.array()
}

/// Gradient contributions of one node to its inputs.
fn local_gradients(nodes: &[Node], node: &Node, g: &Tensor2) -> Vec<(usize, Tensor2)> {
    let val = |i: usize| -> &Tensor2 { &nodes[i].value };
    let tracked = |i: usize| nodes[i].tracked;
    let y = &*node.value;
    match &node.op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) => {
            let mut out = Vec::with_capacity(2);
            if tracked(*a) {
                out.push((*a, Tensor2::from_array(arr(g).dot(&arr(val(*b)).t()))));
            }
            if tracked(*b) {
                out.push((*b, Tensor2::from_array(arr(val(*a)).t().dot(arr(g)))));
            }
            out
        }
        Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
        Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
        Op::Hadamard(a, b) => {
            let mut out = Vec::with_capacity(2);
            if tracked(*a) {
                out.push((*a, Tensor2::from_array(arr(g) * arr(val(*b)))));
            }
            if tracked(*b) {
                out.push((*b, Tensor2::from_array(arr(g) * arr(val(*a)))));
            }
            out
        }
        Op::Transpose(a) => vec![(*a, g.transpose())],
        Op::Scale(a, k) => vec![(*a, g.scale(*k))],
        Op::Offset(a) => vec![(*a, g.clone())],
        Op::OuterSum(col, row) => {
            let dcol = arr(g).sum_axis(Axis(1)).insert_axis(Axis(1));
            let drow = arr(g).sum_axis(Axis(0)).insert_axis(Axis(0));
            vec![(*col, Tensor2::from_array(dcol)), (*row, Tensor2::from_array(drow))]
        }
        Op::MaskedSoftmax(a) => {
            let gy = arr(g) * arr(y);
            let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
            let dx = (arr(g) - &dot) * arr(y);
            vec![(*a, Tensor2::from_array(dx))]
        }
        Op::LogSoftmax(a) => {
            let soft = arr(y).mapv(f64::exp);
            let gsum = arr(g).sum_axis(Axis(1)).insert_axis(Axis(1));
            vec![(*a, Tensor2::from_array(arr(g) - &(soft * &gsum)))]
        }
        Op::Sigmoid(a) => {
            let d = arr(y).mapv(|s| s * (1.0 - s));
            vec![(*a, Tensor2::from_array(arr(g) * &d))]
        }
        Op::Relu(a) => {
            let d = arr(val(*a)).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            vec![(*a, Tensor2::from_array(arr(g) * &d))]
        }
        Op::Elu(a, alpha) => {
            let mut d = arr(val(*a)).clone();
            ndarray::Zip::from(&mut d).and(arr(y)).for_each(|x, &out| {
                *x = if *x > 0.0 { 1.0 } else { out + alpha };
            });
            vec![(*a, Tensor2::from_array(arr(g) * &d))]
        }
        Op::LeakyRelu(a, slope) => {
            let d = arr(val(*a)).mapv(|x| if x > 0.0 { 1.0 } else { *slope });
            vec![(*a, Tensor2::from_array(arr(g) * &d))]
        }
        Op::Exp(a) => vec![(*a, Tensor2::from_array(arr(g) * arr(y)))],
        Op::Clamp(a, lo, hi) => {
            let d = arr(val(*a)).mapv(|x| if x >= *lo && x <= *hi { 1.0 } else { 0.0 });
            vec![(*a, Tensor2::from_array(arr(g) * &d))]
        }
        Op::ConcatCols(parts) => {
            let mut start = 0;
            parts
                .iter()
                .map(|&p| {
                    let w = val(p).cols();
                    let piece = g.slice_cols(start, start + w);
                    start += w;
                    (p, piece)
                })
                .collect()
        }
        Op::SliceRows(a, start) => {
            let src = val(*a);
            let mut d = Array2::zeros((src.rows(), src.cols()));
            d.slice_mut(ndarray::s![*start..*start + g.rows(), ..]).assign(arr(g));
            vec![(*a, Tensor2::from_array(d))]
        }
        Op::SliceCols(a, start) => {
            let src = val(*a);
            let mut d = Array2::zeros((src.rows(), src.cols()));
            d.slice_mut(ndarray::s![.., *start..*start + g.cols()]).assign(arr(g));
            vec![(*a, Tensor2::from_array(d))]
        }
        Op::Sum(a) => {
            let (r, c) = val(*a).shape();
            vec![(*a, Tensor2::filled(r, c, g.get(0, 0)))]
        }
        Op::Mean(a) => {
            let (r, c) = val(*a).shape();
            vec![(*a, Tensor2::filled(r, c, g.get(0, 0) / (r * c) as f64))]
        }
        Op::MulConst(a, k) => vec![(*a, Tensor2::from_array(arr(g) * arr(k)))],
        Op::WeightedBce { logits, target, weights, denom } => {
            let scale = g.get(0, 0) / denom;
            let mut d = arr(val(*logits)).mapv(sigmoid);
            ndarray::Zip::from(&mut d)
                .and(arr(target))
                .and(arr(weights))
                .for_each(|s, &t, &w| *s = scale * w * (*s - t));
            vec![(*logits, Tensor2::from_array(d))]
        }
        Op::Custom(inputs, backward) => {
            let values: Vec<Rc<Tensor2>> = inputs.iter().map(|&i| Rc::clone(&nodes[i].value)).collect();
            inputs.iter().copied().zip(backward(g, &values, y)).collect()
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

/// Row-wise softmax restricted to entries where `mask` is nonzero; masked
/// entries are exactly zero. A fully masked row is all zeros.
pub fn masked_softmax(x: &Tensor2, mask: &Tensor2) -> Result<Tensor2> {
    if x.shape() != mask.shape() {
        return Err(shape_err("row_softmax_masked", x.shape(), mask.shape()));
    }
    let mut out = Tensor2::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let xr = x.row(i);
        let mr = mask.row(i);
        let max =
            xr.iter().zip(mr.iter()).filter(|(_, &m)| m != 0.0).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for j in 0..x.cols() {
            if mr[j] != 0.0 {
                let e = (xr[j] - max).exp();
                out.set(i, j, e);
                total += e;
            }
        }
        for j in 0..x.cols() {
            if mr[j] != 0.0 {
                out.set(i, j, out.get(i, j) / total);
            }
        }
    }
    Ok(out)
}

pub fn log_softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = x.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for j in 0..x.cols() {
            out.set(i, j, x.get(i, j) - lse);
        }
    }
    out
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor2> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Shape {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    fn binary(&self, other: &Var<'t>, value: Tensor2, op: Op) -> Var<'t> {
        self.same_tape(other);
        let tracked = self.tape.any_tracked(&[self.id, other.id]);
        self.tape.push(value, op, tracked)
    }

    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self.value().matmul(&other.value())?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self
            .value()
            .zip_map(&other.value(), |a, b| a + b)
            .map_err(|_| shape_err("add", self.shape(), other.shape()))?;
        Ok(self.binary(other, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self
            .value()
            .zip_map(&other.value(), |a, b| a - b)
            .map_err(|_| shape_err("sub", self.shape(), other.shape()))?;
        Ok(self.binary(other, v, Op::Sub(self.id, other.id)))
    }

    pub fn hadamard(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let v = self
            .value()
            .zip_map(&other.value(), |a, b| a * b)
            .map_err(|_| shape_err("hadamard", self.shape(), other.shape()))?;
        Ok(self.binary(other, v, Op::Hadamard(self.id, other.id)))
    }

    /// Elementwise product with a constant that is not recorded as a node.
    pub fn mul_const(&self, k: Rc<Tensor2>) -> Result<Var<'t>> {
        let v = self.value().zip_map(&k, |a, b| a * b).map_err(|_| shape_err("mul_const", self.shape(), k.shape()))?;
        Ok(self.tape.unary(self.id, v, Op::MulConst(self.id, k)))
    }

    pub fn transpose(&self) -> Var<'t> {
        let v = self.value().transpose();
        self.tape.unary(self.id, v, Op::Transpose(self.id))
    }

    pub fn scale(&self, k: f64) -> Var<'t> {
        let v = self.value().scale(k);
        self.tape.unary(self.id, v, Op::Scale(self.id, k))
    }

    /// Adds `c` to every entry.
    pub fn offset(&self, c: f64) -> Var<'t> {
        let v = self.value().map(|x| x + c);
        self.tape.unary(self.id, v, Op::Offset(self.id))
    }

    /// `out[i][j] = col[i] + row[j]` for an n×1 `self` and a 1×m `row`.
    pub fn outer_sum(&self, row: &Var<'t>) -> Result<Var<'t>> {
        let (c, r) = (self.value(), row.value());
        if c.cols() != 1 || r.rows() != 1 {
            return Err(shape_err("outer_sum", c.shape(), r.shape()));
        }
        let v = Tensor2::from_fn(c.rows(), r.cols(), |i, j| c.get(i, 0) + r.get(0, j));
        Ok(self.binary(row, v, Op::OuterSum(self.id, row.id)))
    }

    pub fn row_softmax_masked(&self, mask: &Tensor2) -> Result<Var<'t>> {
        let v = masked_softmax(&self.value(), mask)?;
        Ok(self.tape.unary(self.id, v, Op::MaskedSoftmax(self.id)))
    }

    pub fn log_softmax_rows(&self) -> Var<'t> {
        let v = log_softmax_rows(&self.value());
        self.tape.unary(self.id, v, Op::LogSoftmax(self.id))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        let v = self.value().map(sigmoid);
        self.tape.unary(self.id, v, Op::Sigmoid(self.id))
    }

    pub fn relu(&self) -> Var<'t> {
        let v = self.value().map(|x| x.max(0.0));
        self.tape.unary(self.id, v, Op::Relu(self.id))
    }

    pub fn elu(&self, alpha: f64) -> Var<'t> {
        let v = self.value().map(|x| elu(x, alpha));
        self.tape.unary(self.id, v, Op::Elu(self.id, alpha))
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'t> {
        let v = self.value().map(|x| if x > 0.0 { x } else { slope * x });
        self.tape.unary(self.id, v, Op::LeakyRelu(self.id, slope))
    }

    pub fn exp(&self) -> Var<'t> {
        let v = self.value().map(f64::exp);
        self.tape.unary(self.id, v, Op::Exp(self.id))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'t> {
        let v = self.value().map(|x| x.clamp(lo, hi));
        self.tape.unary(self.id, v, Op::Clamp(self.id, lo, hi))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| NumericsError::Config("concat_cols of nothing".into()))?;
        let values: Vec<Rc<Tensor2>> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor2> = values.iter().map(|v| v.as_ref()).collect();
        let v = Tensor2::concat_cols(&refs)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let tracked = first.tape.any_tracked(&ids);
        Ok(first.tape.push(v, Op::ConcatCols(ids), tracked))
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        if start >= end || end > x.rows() {
            return Err(shape_err("slice_rows", x.shape(), (start, end)));
        }
        let v = x.slice_rows(start, end);
        Ok(self.tape.unary(self.id, v, Op::SliceRows(self.id, start)))
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        if start >= end || end > x.cols() {
            return Err(shape_err("slice_cols", x.shape(), (start, end)));
        }
        let v = x.slice_cols(start, end);
        Ok(self.tape.unary(self.id, v, Op::SliceCols(self.id, start)))
    }

    pub fn row(&self, i: usize) -> Result<Var<'t>> {
        self.slice_rows(i, i + 1)
    }

    pub fn sum(&self) -> Var<'t> {
        let v = Tensor2::filled(1, 1, self.value().sum());
        self.tape.unary(self.id, v, Op::Sum(self.id))
    }

    pub fn mean(&self) -> Var<'t> {
        let x = self.value();
        let v = Tensor2::filled(1, 1, x.sum() / x.len().max(1) as f64);
        self.tape.unary(self.id, v, Op::Mean(self.id))
    }

    /// Inverted dropout: zeroes entries with probability `p` and rescales
    /// survivors by `1/(1-p)`. Identity when `train` is false or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&self, p: f64, rng: &mut R, train: bool) -> Result<Var<'t>> {
        if !(0.0..1.0).contains(&p) {
            return Err(NumericsError::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(*self);
        }
        let (r, c) = self.shape();
        let keep = 1.0 / (1.0 - p);
        let mask = Tensor2::from_fn(r, c, |_, _| if rng.random::<f64>() < p { 0.0 } else { keep });
        self.mul_const(Rc::new(mask))
    }

    /// Weighted mean binary cross-entropy of `sigmoid(self)` against
    /// `target`: `sum(w * (softplus(x) - t*x)) / denom`.
    pub fn weighted_bce_with_logits(&self, target: Rc<Tensor2>, weights: Rc<Tensor2>, denom: f64) -> Result<Var<'t>> {
        let x = self.value();
        if x.shape() != target.shape() {
            return Err(shape_err("weighted_bce", x.shape(), target.shape()));
        }
        if x.shape() != weights.shape() {
            return Err(shape_err("weighted_bce", x.shape(), weights.shape()));
        }
        if denom.is_nan() || denom <= 0.0 {
            return Err(NumericsError::Config(format!("bce normalizer {denom} must be positive")));
        }
        let total: f64 = x
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .zip(weights.as_slice())
            .map(|((&x, &t), &w)| if w == 0.0 { 0.0 } else { w * (softplus(x) - t * x) })
            .sum();
        let v = Tensor2::filled(1, 1, total / denom);
        Ok(self.tape.unary(self.id, v, Op::WeightedBce { logits: self.id, target, weights, denom }))
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`, or `None` if the loss does not depend on it.
    pub fn get(&self, v: &Var<'_>) -> Option<&Tensor2> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Like [`Gradients::get`] but yields zeros of the right shape when unreached.
    pub fn wrt(&self, v: &Var<'_>) -> Tensor2 {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = v.shape();
                Tensor2::zeros(r, c)
            }
        }
    }
}
