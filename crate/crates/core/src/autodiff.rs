//! Define-by-run reverse-mode differentiation.
//!
//! Every operation appends a node to a [`Tape`] holding its forward value
//! and enough context to run its backward rule. Nodes are only ever pushed,
//! so the tape is always in topological order and [`Tape::backward`] is a
//! single reverse sweep that visits each node once.

use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{SparseMatrix, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds, used for reporting and for fault injection in the
/// gradient self-check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    SpMM,
    Concat,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Abs,
    Sum,
    SumLastAxis,
    Gather,
    SegmentSum,
    SegmentSoftmax,
    MulRows,
    Reshape,
}

impl OpKind {
    pub const DIFFERENTIABLE: [OpKind; 20] = [
        OpKind::MatMul,
        OpKind::SpMM,
        OpKind::Concat,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Scale,
        OpKind::AddScalar,
        OpKind::Relu,
        OpKind::LeakyRelu,
        OpKind::Tanh,
        OpKind::Sigmoid,
        OpKind::Abs,
        OpKind::Sum,
        OpKind::SumLastAxis,
        OpKind::Gather,
        OpKind::SegmentSum,
        OpKind::SegmentSoftmax,
        OpKind::MulRows,
        OpKind::Reshape,
    ];
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Concat(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Abs(Var),
    Sum(Var),
    SumLastAxis(Var),
    Gather(Var, Rc<[usize]>),
    SegmentSum(Var, Rc<[usize]>),
    SegmentSoftmax(Var, Rc<[usize]>, usize),
    MulRows(Var, Var),
    Reshape(Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::SpMM(..) => OpKind::SpMM,
            Op::Concat(..) => OpKind::Concat,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::AddScalar(..) => OpKind::AddScalar,
            Op::Relu(..) => OpKind::Relu,
            Op::LeakyRelu(..) => OpKind::LeakyRelu,
            Op::Tanh(..) => OpKind::Tanh,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Abs(..) => OpKind::Abs,
            Op::Sum(..) => OpKind::Sum,
            Op::SumLastAxis(..) => OpKind::SumLastAxis,
            Op::Gather(..) => OpKind::Gather,
            Op::SegmentSum(..) => OpKind::SegmentSum,
            Op::SegmentSoftmax(..) => OpKind::SegmentSoftmax,
            Op::MulRows(..) => OpKind::MulRows,
            Op::Reshape(..) => OpKind::Reshape,
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
    flip_sign: Option<OpKind>,
}

/// Checks that `rhs` broadcasts against `lhs` along trailing dimensions.
fn trailing_broadcast(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Result<()> {
    if rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs {
        Ok(())
    } else {
        Err(Error::shape(op, lhs, rhs))
    }
}

fn check_segments(op: &'static str, ids: &[usize], n: usize, num_segments: usize) -> Result<()> {
    if ids.len() != n {
        return Err(Error::Segment {
            op,
            msg: format!("{} segment ids for {} rows", ids.len(), n),
        });
    }
    if let Some(&bad) = ids.iter().find(|&&s| s >= num_segments) {
        return Err(Error::Segment {
            op,
            msg: format!("segment id {bad} out of range 0..{num_segments}"),
        });
    }
    Ok(())
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let dst = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in dst.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `aᵀ · b` for `a: [k×m]`, `b: [k×n]`.
fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a · bᵀ` for `a: [m×n]`, `b: [k×n]`.
fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            out[i * k + p] = arow.iter().zip(&b[p * n..(p + 1) * n]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Numerically stable softmax within each segment. Segment order follows
/// input order so results are deterministic.
pub fn segment_softmax_values(logits: &[f64], ids: &[usize], num_segments: usize) -> Vec<f64> {
    let mut max = vec![f64::NEG_INFINITY; num_segments];
    for (&x, &s) in logits.iter().zip(ids) {
        if x > max[s] {
            max[s] = x;
        }
    }
    let mut denom = vec![0.0; num_segments];
    let exps: Vec<f64> = logits
        .iter()
        .zip(ids)
        .map(|(&x, &s)| {
            let e = (x - max[s]).exp();
            denom[s] += e;
            e
        })
        .collect();
    exps.iter().zip(ids).map(|(e, &s)| e / denom[s]).collect()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Flips the sign of one operation's backward rule. Only used to prove
    /// that the gradient checks detect a broken rule.
    pub fn inject_sign_flip(&mut self, kind: OpKind) {
        self.flip_sign = Some(kind);
    }

    /// Op kinds recorded on this tape, in order.
    pub fn op_kinds(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.nodes.iter().map(|n| n.op.kind())
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers a leaf. Gradients are accumulated only for leaves with
    /// `requires_grad` and for nodes downstream of them.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward pass, if the node took part in it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Clears gradients so that [`backward`](Self::backward) may run again.
    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], data)?, Op::MatMul(a, b), rg))
    }

    /// Constant sparse matrix times a dense node.
    pub fn spmm(&mut self, m: &Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let out = m.matmul_dense(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::SpMM(Arc::clone(m), x), rg))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.is_empty() || sb.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::shape("concat", sa, sb));
        }
        let (p, q) = (ta.cols(), tb.cols());
        let rows = ta.rows();
        let mut data = Vec::with_capacity(rows * (p + q));
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * p..(r + 1) * p]);
            data.extend_from_slice(&tb.data()[r * q..(r + 1) * q]);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().expect("non-empty") = p + q;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Concat(a, b), rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        trailing_broadcast(name, ta.shape(), tb.shape())?;
        let bd = tb.data();
        let m = bd.len();
        let data: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bd[i % m]))
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, data)?, op, rg))
    }

    /// `a + b`, where `b`'s shape must equal a trailing suffix of `a`'s.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Sums the last axis away.
    pub fn sum_last_axis(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let c = t.cols();
        let data: Vec<f64> = t.data().chunks(c.max(1)).map(|r| r.iter().sum()).collect();
        let shape = t.shape()[..t.shape().len().saturating_sub(1)].to_vec();
        let rg = self.rg(a);
        self.push(Tensor::new(shape, data).expect("shape"), Op::SumLastAxis(a), rg)
    }

    /// Row gather: output row `i` is input row `idx[i]`.
    pub fn gather(&mut self, a: Var, idx: &Rc<[usize]>) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 2 {
            return Err(Error::shape("gather", t.shape(), &[idx.len()]));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.shape()[0]) {
            return Err(Error::Segment {
                op: "gather",
                msg: format!("row {bad} out of range 0..{}", t.shape()[0]),
            });
        }
        let out = t.select_rows(idx);
        let rg = self.rg(a);
        Ok(self.push(out, Op::Gather(a, Rc::clone(idx)), rg))
    }

    /// Row `s` of the output is the sum of input rows whose id is `s`,
    /// accumulated in input order. Empty segments give zero rows.
    pub fn segment_sum(&mut self, a: Var, ids: &Rc<[usize]>, num_segments: usize) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 2 {
            return Err(Error::shape("segment_sum", t.shape(), &[ids.len()]));
        }
        check_segments("segment_sum", ids, t.shape()[0], num_segments)?;
        let d = t.cols();
        let mut out = Tensor::zeros(&[num_segments, d]);
        for (i, &s) in ids.iter().enumerate() {
            for (o, v) in out.row_mut(s).iter_mut().zip(t.row(i)) {
                *o += v;
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::SegmentSum(a, Rc::clone(ids)), rg))
    }

    /// Softmax of a 1-D logit vector within each segment.
    pub fn segment_softmax(
        &mut self,
        logits: Var,
        ids: &Rc<[usize]>,
        num_segments: usize,
    ) -> Result<Var> {
        let t = self.value(logits);
        if t.shape().len() != 1 {
            return Err(Error::shape("segment_softmax", t.shape(), &[ids.len()]));
        }
        if t.is_empty() {
            return Err(Error::Segment {
                op: "segment_softmax",
                msg: "empty segment list".into(),
            });
        }
        check_segments("segment_softmax", ids, t.len(), num_segments)?;
        let data = segment_softmax_values(t.data(), ids, num_segments);
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::vector(data),
            Op::SegmentSoftmax(logits, Rc::clone(ids), num_segments),
            rg,
        ))
    }

    /// Scales row `i` of `a: [n×d]` by `w[i]` for `w: [n]`.
    pub fn mul_rows(&mut self, a: Var, w: Var) -> Result<Var> {
        let (ta, tw) = (self.value(a), self.value(w));
        if ta.shape().len() != 2 || tw.shape() != [ta.shape()[0]] {
            return Err(Error::shape("mul_rows", ta.shape(), tw.shape()));
        }
        let d = ta.cols();
        let data: Vec<f64> = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * tw.data()[i / d.max(1)])
            .collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(a) || self.rg(w);
        Ok(self.push(Tensor::new(shape, data)?, Op::MulRows(a, w), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Populates gradients of `loss` with respect to every node that
    /// depends on a `requires_grad` leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Autodiff(
                "backward already ran on this tape; call reset_grads first".into(),
            ));
        }
        if self.nodes.is_empty() {
            return Err(Error::Autodiff("empty tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Autodiff(format!(
                "loss must be scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            let sign = if self.flip_sign == Some(self.nodes[id].op.kind()) {
                -1.0
            } else {
                1.0
            };
            for (input, contrib) in self.local_grads(id, &g) {
                if !self.rg(input) {
                    continue;
                }
                let slot = &mut grads[input.0];
                match slot {
                    Some(acc) => {
                        for (a, c) in acc.data_mut().iter_mut().zip(contrib.data()) {
                            *a += sign * c;
                        }
                    }
                    None => {
                        let mut c = contrib;
                        if sign < 0.0 {
                            c.data_mut().iter_mut().for_each(|v| *v = -*v);
                        }
                        *slot = Some(c);
                    }
                }
            }
            grads[id] = Some(g);
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    fn like(&self, v: Var, data: Vec<f64>) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), data).expect("gradient shape")
    }

    /// Sums a broadcast gradient back onto the shape of `b`.
    fn reduce_to(&self, b: Var, g: &[f64]) -> Tensor {
        let m = self.value(b).len();
        let mut out = vec![0.0; m];
        for (i, v) in g.iter().enumerate() {
            out[i % m] += v;
        }
        self.like(b, out)
    }

    fn local_grads(&self, id: usize, g: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[id];
        let y = &node.value;
        let gd = g.data();
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut out = Vec::new();
                if self.rg(*a) {
                    let da = matmul_nt(gd, self.value(*b).data(), m, n, k);
                    out.push((*a, self.like(*a, da)));
                }
                if self.rg(*b) {
                    let db = matmul_tn(self.value(*a).data(), gd, m, k, n);
                    out.push((*b, self.like(*b, db)));
                }
                out
            }
            Op::SpMM(m, x) => vec![(*x, m.transpose_matmul_dense(g))],
            Op::Concat(a, b) => {
                let p = self.value(*a).cols();
                let q = self.value(*b).cols();
                let rows = y.rows();
                let (mut da, mut db) = (Vec::with_capacity(rows * p), Vec::with_capacity(rows * q));
                for r in 0..rows {
                    let row = &gd[r * (p + q)..(r + 1) * (p + q)];
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                vec![(*a, self.like(*a, da)), (*b, self.like(*b, db))]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, self.reduce_to(*b, gd))],
            Op::Sub(a, b) => {
                let neg: Vec<f64> = gd.iter().map(|v| -v).collect();
                vec![(*a, g.clone()), (*b, self.reduce_to(*b, &neg))]
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                let m = bd.len();
                let da = gd.iter().enumerate().map(|(i, v)| v * bd[i % m]).collect();
                let gb: Vec<f64> = gd.iter().zip(ad).map(|(v, x)| v * x).collect();
                vec![(*a, self.like(*a, da)), (*b, self.reduce_to(*b, &gb))]
            }
            Op::Scale(a, c) => vec![(*a, self.like(*a, gd.iter().map(|v| c * v).collect()))],
            Op::AddScalar(a) | Op::Reshape(a) => vec![(*a, self.like(*a, gd.to_vec()))],
            Op::Relu(a) => {
                let x = self.value(*a).data();
                let d = gd.iter().zip(x).map(|(v, &x)| if x > 0.0 { *v } else { 0.0 }).collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a).data();
                let d = gd
                    .iter()
                    .zip(x)
                    .map(|(v, &x)| if x > 0.0 { *v } else { slope * v })
                    .collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::Tanh(a) => {
                let d = gd.iter().zip(y.data()).map(|(v, t)| v * (1.0 - t * t)).collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::Sigmoid(a) => {
                let d = gd.iter().zip(y.data()).map(|(v, s)| v * s * (1.0 - s)).collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::Abs(a) => {
                let x = self.value(*a).data();
                let d = gd
                    .iter()
                    .zip(x)
                    .map(|(v, &x)| {
                        if x > 0.0 {
                            *v
                        } else if x < 0.0 {
                            -v
                        } else {
                            0.0
                        }
                    })
                    .collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                vec![(*a, self.like(*a, vec![gd[0]; n]))]
            }
            Op::SumLastAxis(a) => {
                let c = self.value(*a).cols();
                let n = self.value(*a).len();
                let d = (0..n).map(|i| gd[i / c.max(1)]).collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::Gather(a, idx) => {
                let mut d = Tensor::zeros(self.shape(*a));
                for (i, &src) in idx.iter().enumerate() {
                    for (o, v) in d.row_mut(src).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
                vec![(*a, d)]
            }
            Op::SegmentSum(a, ids) => {
                let d = g.select_rows(ids);
                vec![(*a, self.like(*a, d.into_data()))]
            }
            Op::SegmentSoftmax(a, ids, num_segments) => {
                let mut dot = vec![0.0; *num_segments];
                for ((yv, gv), &s) in y.data().iter().zip(gd).zip(ids.iter()) {
                    dot[s] += yv * gv;
                }
                let d = y
                    .data()
                    .iter()
                    .zip(gd)
                    .zip(ids.iter())
                    .map(|((yv, gv), &s)| yv * (gv - dot[s]))
                    .collect();
                vec![(*a, self.like(*a, d))]
            }
            Op::MulRows(a, w) => {
                let (ta, tw) = (self.value(*a), self.value(*w));
                let d = ta.cols().max(1);
                let da = gd.iter().enumerate().map(|(i, v)| v * tw.data()[i / d]).collect();
                let dw = (0..tw.len())
                    .map(|r| g.row(r).iter().zip(ta.row(r)).map(|(x, y)| x * y).sum())
                    .collect();
                vec![(*a, self.like(*a, da)), (*w, self.like(*w, dw))]
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let a = t.constant(mat(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
        let i = t.constant(Tensor::identity(2));
        let c = t.matmul(a, i).unwrap();
        assert_eq!(t.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);

        let i = t.constant(Tensor::identity(2));
        let b = t.constant(mat(&[vec![5.0], vec![7.0]]));
        let c = t.matmul(i, b).unwrap();
        assert_eq!(t.value(c).data(), &[5.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        let msg = t.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn concat_basic_and_empty() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let b = t.constant(Tensor::vector(vec![3.0]));
        let c = t.concat(a, b).unwrap();
        assert_eq!(t.value(c).data(), &[1.0, 2.0, 3.0]);
        let e = t.constant(Tensor::vector(vec![]));
        let c = t.concat(a, e).unwrap();
        assert_eq!(t.value(c), t.value(a));

        let x = t.constant(Tensor::zeros(&[2, 1]));
        let y = t.constant(Tensor::zeros(&[3, 1]));
        assert!(t.concat(x, y).is_err());
    }

    #[test]
    fn segment_softmax_examples() {
        let mut t = Tape::new();
        let ids: Rc<[usize]> = vec![0, 0, 0].into();
        let x = t.constant(Tensor::vector(vec![0.0; 3]));
        let y = t.segment_softmax(x, &ids, 1).unwrap();
        for v in t.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let ids: Rc<[usize]> = vec![0].into();
        let x = t.constant(Tensor::vector(vec![5.0]));
        let y = t.segment_softmax(x, &ids, 1).unwrap();
        assert_eq!(t.value(y).data(), &[1.0]);

        let ids: Rc<[usize]> = vec![0, 0].into();
        let x = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let y = t.segment_softmax(x, &ids, 1).unwrap();
        let e = std::f64::consts::E;
        let v = t.value(y).data();
        assert!((v[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((v[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((v[0] - 0.2689).abs() < 1e-4 && (v[1] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn segment_softmax_errors() {
        let mut t = Tape::new();
        let empty: Rc<[usize]> = Vec::new().into();
        let x = t.constant(Tensor::vector(vec![]));
        assert!(t.segment_softmax(x, &empty, 1).is_err());
        let ids: Rc<[usize]> = vec![0, 3].into();
        let x = t.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(t.segment_softmax(x, &ids, 2).is_err());
    }

    #[test]
    fn segment_sum_examples() {
        let mut t = Tape::new();
        let x = t.constant(mat(&[vec![1.0], vec![2.0], vec![3.0]]));
        let ids: Rc<[usize]> = vec![0, 0, 1].into();
        let s = t.segment_sum(x, &ids, 2).unwrap();
        assert_eq!(t.value(s).data(), &[3.0, 3.0]);

        let x = t.constant(mat(&[vec![1.0, 10.0], vec![2.0, 20.0]]));
        let ids: Rc<[usize]> = vec![0, 0].into();
        let s = t.segment_sum(x, &ids, 1).unwrap();
        assert_eq!(t.value(s).data(), &[3.0, 30.0]);

        let ids: Rc<[usize]> = vec![0, 2].into();
        assert!(t.segment_sum(x, &ids, 2).is_err());
    }

    #[test]
    fn elementwise_examples() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let r = t.relu(x);
        assert_eq!(t.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = t.constant(Tensor::scalar(0.0));
        let th = t.tanh(z);
        assert_eq!(t.value(th).item(), 0.0);
        let m = t.constant(Tensor::scalar(-10.0));
        let l = t.leaky_relu(m, 0.3);
        assert!((t.value(l).item() + 3.0).abs() < 1e-12);

        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2]));
        assert!(t.add(a, b).is_err());
        let bias = t.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = t.add(a, bias).unwrap();
        assert_eq!(t.value(s).data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn backward_simple_cases() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![2.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_twice_requires_reset() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0]));
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert!(t.backward(s).is_err());
        t.reset_grads();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        let y = t.relu(x);
        assert!(t.backward(y).is_err());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let x = t.param(Tensor::vector(vec![3.0, 4.0]));
        let p = t.mul(c, x).unwrap();
        let s = t.sum(p);
        t.backward(s).unwrap();
        assert!(t.grad(c).is_none());
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, 2.0]);
    }
}
