//! Reverse-mode automatic differentiation over small vector-valued graphs.
//!
//! A [`ValueGraph`] is a tape of nodes in topological order: every node's
//! inputs were appended before it, so a single forward sweep evaluates the
//! whole graph and a single reverse sweep from a scalar root fills every
//! gradient buffer. Leaf values can be overwritten and the graph re-evaluated
//! in place, which lets training loops build their step graph once and reuse
//! it for thousands of iterations without reallocating.
//!
//! Gradient buffers are zeroed at the start of every backward pass;
//! accumulation across backward calls is not supported.

use crate::error::{CoreError, Result};
use crate::nn::activation::Activation;

/// Handle to a node in a [`ValueGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    /// Leaf whose gradient is of interest (parameters, optimized inputs).
    Variable,
    /// Leaf treated as fixed data. Gradients are still propagated into it,
    /// they are just not read by anyone.
    Constant,
    /// `y = W x`, with `W` flat row-major (rows x cols) as first input.
    MatVec { rows: usize, cols: usize },
    /// `y = W^T x`, same `W` layout; `x` has length `rows`, `y` length `cols`.
    MatVecT { rows: usize, cols: usize },
    Add,
    Sub,
    Mul,
    AddConst(f64),
    Scale(f64),
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Softmax,
    /// Elementwise `1.0` where the input is positive, else `0.0`.
    /// Derivative of relu; its own gradient is zero everywhere.
    GtMask,
    /// Elementwise `1.0` where positive, else `slope`. Zero gradient.
    LeakyMask(f64),
    Sqrt,
    Sum,
    Mean,
    /// Select one coordinate as a length-1 vector.
    Pick(usize),
    /// Mean binary cross-entropy between logits and fixed targets.
    BceWithLogits(Vec<f64>),
    /// Cross-entropy of softmax(logits) against a fixed class index.
    SoftmaxCrossEntropy(usize),
    /// Scalar squared Euclidean distance to a fixed target vector.
    SquaredDistance(Vec<f64>),
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Vec<f64>,
    grad: Vec<f64>,
}

/// Tape of differentiable operations. See module docs.
#[derive(Default)]
pub struct ValueGraph {
    nodes: Vec<Node>,
}

impl ValueGraph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Vec<f64>) -> NodeId {
        let grad = vec![0.0; value.len()];
        self.nodes.push(Node {
            op,
            inputs,
            value,
            grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Current value of a node.
    pub fn value(&self, id: NodeId) -> &[f64] {
        self.val(id)
    }

    /// Value of a length-1 node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    /// Gradient buffer of a node, valid after [`ValueGraph::backward`].
    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    /// Overwrite a leaf's value. Panics on non-leaf nodes or length mismatch.
    pub fn set_value(&mut self, id: NodeId, value: &[f64]) {
        let node = &mut self.nodes[id.0];
        assert!(
            matches!(node.op, Op::Variable | Op::Constant),
            "set_value on a non-leaf node"
        );
        assert_eq!(node.value.len(), value.len(), "set_value length mismatch");
        node.value.copy_from_slice(value);
    }

    pub fn variable(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Variable, Vec::new(), value)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Constant, Vec::new(), value)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.val(w).len(), rows * cols, "matvec weight length");
        assert_eq!(self.val(x).len(), cols, "matvec input length");
        let mut y = vec![0.0; rows];
        eval_matvec(self.val(w), self.val(x), rows, cols, &mut y);
        self.push(Op::MatVec { rows, cols }, vec![w, x], y)
    }

    pub fn matvec_t(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> NodeId {
        assert_eq!(self.val(w).len(), rows * cols, "matvec_t weight length");
        assert_eq!(self.val(x).len(), rows, "matvec_t input length");
        let mut y = vec![0.0; cols];
        eval_matvec_t(self.val(w), self.val(x), rows, cols, &mut y);
        self.push(Op::MatVecT { rows, cols }, vec![w, x], y)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.val(a).len(), self.val(b).len(), "add length mismatch");
        let v = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add, vec![a, b], v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.val(a).len(), self.val(b).len(), "sub length mismatch");
        let v = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x - y)
            .collect();
        self.push(Op::Sub, vec![a, b], v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.val(a).len(), self.val(b).len(), "mul length mismatch");
        let v = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| x * y)
            .collect();
        self.push(Op::Mul, vec![a, b], v)
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a).iter().map(|x| x + c).collect();
        self.push(Op::AddConst(c), vec![a], v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.val(a).iter().map(|x| x * c).collect();
        self.push(Op::Scale(c), vec![a], v)
    }

    /// Apply an activation. Identity returns the input node unchanged.
    pub fn activation(&mut self, a: NodeId, act: Activation) -> NodeId {
        let op = match act {
            Activation::Identity => return a,
            Activation::Relu => Op::Relu,
            Activation::LeakyRelu(slope) => Op::LeakyRelu(slope),
            Activation::Tanh => Op::Tanh,
            Activation::Sigmoid => Op::Sigmoid,
            Activation::Softmax => Op::Softmax,
        };
        let mut v = vec![0.0; self.val(a).len()];
        eval_unary(&op, self.val(a), &mut v);
        self.push(op, vec![a], v)
    }

    pub fn gt_mask(&mut self, a: NodeId) -> NodeId {
        let v = self
            .val(a)
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
            .collect();
        self.push(Op::GtMask, vec![a], v)
    }

    pub fn leaky_mask(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self
            .val(a)
            .iter()
            .map(|&x| if x > 0.0 { 1.0 } else { slope })
            .collect();
        self.push(Op::LeakyMask(slope), vec![a], v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.val(a).iter().map(|x| x.sqrt()).collect();
        self.push(Op::Sqrt, vec![a], v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = vec![self.val(a).iter().sum()];
        self.push(Op::Sum, vec![a], v)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.val(a).len() as f64;
        let v = vec![self.val(a).iter().sum::<f64>() / n];
        self.push(Op::Mean, vec![a], v)
    }

    pub fn pick(&mut self, a: NodeId, index: usize) -> NodeId {
        assert!(index < self.val(a).len(), "pick index out of range");
        let v = vec![self.val(a)[index]];
        self.push(Op::Pick(index), vec![a], v)
    }

    pub fn bce_with_logits(&mut self, logits: NodeId, targets: Vec<f64>) -> NodeId {
        assert_eq!(self.val(logits).len(), targets.len(), "bce target length");
        let v = vec![eval_bce(self.val(logits), &targets)];
        self.push(Op::BceWithLogits(targets), vec![logits], v)
    }

    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target_class: usize) -> NodeId {
        assert!(target_class < self.val(logits).len(), "target class range");
        let v = vec![eval_softmax_ce(self.val(logits), target_class)];
        self.push(Op::SoftmaxCrossEntropy(target_class), vec![logits], v)
    }

    pub fn squared_distance(&mut self, a: NodeId, target: Vec<f64>) -> NodeId {
        assert_eq!(self.val(a).len(), target.len(), "squared_distance length");
        let v = vec![self
            .val(a)
            .iter()
            .zip(&target)
            .map(|(x, t)| (x - t) * (x - t))
            .sum()];
        self.push(Op::SquaredDistance(target), vec![a], v)
    }

    /// Recompute every non-leaf value in topological order. Call after
    /// overwriting leaf values with [`ValueGraph::set_value`].
    pub fn refresh(&mut self) {
        for i in 0..self.nodes.len() {
            let (done, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            match &node.op {
                Op::Variable | Op::Constant => {}
                Op::MatVec { rows, cols } => {
                    let w = &done[node.inputs[0].0].value;
                    let x = &done[node.inputs[1].0].value;
                    eval_matvec(w, x, *rows, *cols, &mut node.value);
                }
                Op::MatVecT { rows, cols } => {
                    let w = &done[node.inputs[0].0].value;
                    let x = &done[node.inputs[1].0].value;
                    eval_matvec_t(w, x, *rows, *cols, &mut node.value);
                }
                Op::Add | Op::Sub | Op::Mul => {
                    let a = &done[node.inputs[0].0].value;
                    let b = &done[node.inputs[1].0].value;
                    match node.op {
                        Op::Add => {
                            for (o, (x, y)) in node.value.iter_mut().zip(a.iter().zip(b)) {
                                *o = x + y;
                            }
                        }
                        Op::Sub => {
                            for (o, (x, y)) in node.value.iter_mut().zip(a.iter().zip(b)) {
                                *o = x - y;
                            }
                        }
                        Op::Mul => {
                            for (o, (x, y)) in node.value.iter_mut().zip(a.iter().zip(b)) {
                                *o = x * y;
                            }
                        }
                        _ => unreachable!(),
                    }
                }
                Op::BceWithLogits(targets) => {
                    let z = &done[node.inputs[0].0].value;
                    node.value[0] = eval_bce(z, targets);
                }
                Op::SoftmaxCrossEntropy(t) => {
                    let z = &done[node.inputs[0].0].value;
                    node.value[0] = eval_softmax_ce(z, *t);
                }
                Op::SquaredDistance(target) => {
                    let a = &done[node.inputs[0].0].value;
                    node.value[0] = a
                        .iter()
                        .zip(target)
                        .map(|(x, t)| (x - t) * (x - t))
                        .sum();
                }
                op => {
                    let a = &done[node.inputs[0].0].value;
                    eval_unary_into(op, a, &mut node.value);
                }
            }
        }
    }

    /// Reverse sweep from a scalar root. Zeroes all gradient buffers first,
    /// then populates the gradient of every node the root depends on.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(CoreError::NonScalarRoot(self.nodes[root.0].value.len()));
        }
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
        self.nodes[root.0].grad[0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            if node.grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            match &node.op {
                Op::Variable | Op::Constant | Op::GtMask | Op::LeakyMask(_) => {}
                Op::MatVec { rows, cols } => {
                    let (wi, xi) = (node.inputs[0].0, node.inputs[1].0);
                    let dy = &node.grad;
                    // Re-borrow disjointly; weight and input are distinct nodes.
                    let x_val = before[xi].value.clone();
                    let w_val = &before[wi].value;
                    let mut dx_acc = vec![0.0; *cols];
                    for r in 0..*rows {
                        let g = dy[r];
                        if g == 0.0 {
                            continue;
                        }
                        let row = &w_val[r * cols..(r + 1) * cols];
                        for c in 0..*cols {
                            dx_acc[c] += row[c] * g;
                        }
                    }
                    {
                        let dw = &mut before[wi].grad;
                        for r in 0..*rows {
                            let g = dy[r];
                            if g == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[r * cols..(r + 1) * cols];
                            for c in 0..*cols {
                                drow[c] += g * x_val[c];
                            }
                        }
                    }
                    let dx = &mut before[xi].grad;
                    for c in 0..*cols {
                        dx[c] += dx_acc[c];
                    }
                }
                Op::MatVecT { rows, cols } => {
                    let (wi, xi) = (node.inputs[0].0, node.inputs[1].0);
                    let dy = &node.grad;
                    let x_val = before[xi].value.clone();
                    let w_val = &before[wi].value;
                    let mut dx_acc = vec![0.0; *rows];
                    for r in 0..*rows {
                        let row = &w_val[r * cols..(r + 1) * cols];
                        let mut acc = 0.0;
                        for c in 0..*cols {
                            acc += row[c] * dy[c];
                        }
                        dx_acc[r] = acc;
                    }
                    {
                        let dw = &mut before[wi].grad;
                        for r in 0..*rows {
                            let xr = x_val[r];
                            if xr == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[r * cols..(r + 1) * cols];
                            for c in 0..*cols {
                                drow[c] += xr * dy[c];
                            }
                        }
                    }
                    let dx = &mut before[xi].grad;
                    for r in 0..*rows {
                        dx[r] += dx_acc[r];
                    }
                }
                Op::Add => {
                    let (ai, bi) = (node.inputs[0].0, node.inputs[1].0);
                    let dy = node.grad.clone();
                    for (d, g) in before[ai].grad.iter_mut().zip(&dy) {
                        *d += g;
                    }
                    for (d, g) in before[bi].grad.iter_mut().zip(&dy) {
                        *d += g;
                    }
                }
                Op::Sub => {
                    let (ai, bi) = (node.inputs[0].0, node.inputs[1].0);
                    let dy = node.grad.clone();
                    for (d, g) in before[ai].grad.iter_mut().zip(&dy) {
                        *d += g;
                    }
                    for (d, g) in before[bi].grad.iter_mut().zip(&dy) {
                        *d -= g;
                    }
                }
                Op::Mul => {
                    let (ai, bi) = (node.inputs[0].0, node.inputs[1].0);
                    let dy = node.grad.clone();
                    let a_val = before[ai].value.clone();
                    let b_val = before[bi].value.clone();
                    for ((d, g), b) in before[ai].grad.iter_mut().zip(&dy).zip(&b_val) {
                        *d += g * b;
                    }
                    for ((d, g), a) in before[bi].grad.iter_mut().zip(&dy).zip(&a_val) {
                        *d += g * a;
                    }
                }
                Op::AddConst(_) => {
                    let ai = node.inputs[0].0;
                    let dy = node.grad.clone();
                    for (d, g) in before[ai].grad.iter_mut().zip(&dy) {
                        *d += g;
                    }
                }
                Op::Scale(c) => {
                    let ai = node.inputs[0].0;
                    let c = *c;
                    let dy = node.grad.clone();
                    for (d, g) in before[ai].grad.iter_mut().zip(&dy) {
                        *d += g * c;
                    }
                }
                Op::Relu => {
                    let ai = node.inputs[0].0;
                    let dy = node.grad.clone();
                    let input = &before[ai];
                    let mask: Vec<f64> = input
                        .value
                        .iter()
                        .map(|&x| if x > 0.0 { 1.0 } else { 0.0 })
                        .collect();
                    for ((d, g), m) in before[ai].grad.iter_mut().zip(&dy).zip(&mask) {
                        *d += g * m;
                    }
                }
                Op::LeakyRelu(slope) => {
                    let ai = node.inputs[0].0;
                    let slope = *slope;
                    let dy = node.grad.clone();
                    let mask: Vec<f64> = before[ai]
                        .value
                        .iter()
                        .map(|&x| if x > 0.0 { 1.0 } else { slope })
                        .collect();
                    for ((d, g), m) in before[ai].grad.iter_mut().zip(&dy).zip(&mask) {
                        *d += g * m;
                    }
                }
                Op::Tanh => {
                    let ai = node.inputs[0].0;
                    let dy = node.grad.clone();
                    let y = node.value.clone();
                    for ((d, g), y) in before[ai].grad.iter_mut().zip(&dy).zip(&y) {
                        *d += g * (1.0 - y * y);
                    }
                }
                Op::Sigmoid => {
                    let ai = node.inputs[0].0;
                    let dy = node.grad.clone();
                    let y = node.value.clone();
                    for ((d, g), y) in before[ai].grad.iter_mut().zip(&dy).zip(&y) {
                        *d += g * y * (1.0 - y);
                    }
                }
                Op::Softmax => {
                    let ai = node.inputs[0].0;
                    let dy = &node.grad;
                    let y = &node.value;
                    let dot: f64 = dy.iter().zip(y).map(|(g, y)| g * y).sum();
                    let dx: Vec<f64> = y.iter().zip(dy).map(|(y, g)| y * (g - dot)).collect();
                    for (d, v) in before[ai].grad.iter_mut().zip(&dx) {
                        *d += v;
                    }
                }
                Op::Sqrt => {
                    let ai = node.inputs[0].0;
                    let dy = node.grad.clone();
                    let y = node.value.clone();
                    for ((d, g), y) in before[ai].grad.iter_mut().zip(&dy).zip(&y) {
                        *d += g * 0.5 / y;
                    }
                }
                Op::Sum => {
                    let ai = node.inputs[0].0;
                    let g = node.grad[0];
                    for d in before[ai].grad.iter_mut() {
                        *d += g;
                    }
                }
                Op::Mean => {
                    let ai = node.inputs[0].0;
                    let n = before[ai].value.len() as f64;
                    let g = node.grad[0] / n;
                    for d in before[ai].grad.iter_mut() {
                        *d += g;
                    }
                }
                Op::Pick(index) => {
                    let ai = node.inputs[0].0;
                    let g = node.grad[0];
                    before[ai].grad[*index] += g;
                }
                Op::BceWithLogits(targets) => {
                    let ai = node.inputs[0].0;
                    let g = node.grad[0];
                    let n = targets.len() as f64;
                    let targets = targets.clone();
                    let z = before[ai].value.clone();
                    for ((d, z), t) in before[ai].grad.iter_mut().zip(&z).zip(&targets) {
                        *d += g * (sigmoid(*z) - t) / n;
                    }
                }
                Op::SoftmaxCrossEntropy(target_class) => {
                    let ai = node.inputs[0].0;
                    let g = node.grad[0];
                    let tc = *target_class;
                    let p = softmax(&before[ai].value);
                    for (j, (d, p)) in before[ai].grad.iter_mut().zip(&p).enumerate() {
                        let t = if j == tc { 1.0 } else { 0.0 };
                        *d += g * (p - t);
                    }
                }
                Op::SquaredDistance(target) => {
                    let ai = node.inputs[0].0;
                    let g = node.grad[0];
                    let target = target.clone();
                    let x = before[ai].value.clone();
                    for ((d, x), t) in before[ai].grad.iter_mut().zip(&x).zip(&target) {
                        *d += g * 2.0 * (x - t);
                    }
                }
            }
        }
        Ok(())
    }
}

fn eval_matvec(w: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for c in 0..cols {
            acc = row[c].mul_add(x[c], acc);
        }
        out[r] = acc;
    }
}

fn eval_matvec_t(w: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    out.fill(0.0);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let xr = x[r];
        for c in 0..cols {
            out[c] = row[c].mul_add(xr, out[c]);
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn eval_bce(z: &[f64], targets: &[f64]) -> f64 {
    let n = z.len() as f64;
    z.iter()
        .zip(targets)
        .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
        .sum::<f64>()
        / n
}

fn eval_softmax_ce(z: &[f64], target: usize) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    lse - z[target]
}

fn eval_unary(op: &Op, a: &[f64], out: &mut Vec<f64>) {
    out.resize(a.len(), 0.0);
    eval_unary_into(op, a, out);
}

fn eval_unary_into(op: &Op, a: &[f64], out: &mut [f64]) {
    match op {
        Op::Relu => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x.max(0.0);
            }
        }
        Op::LeakyRelu(s) => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = if x > 0.0 { x } else { s * x };
            }
        }
        Op::Tanh => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x.tanh();
            }
        }
        Op::Sigmoid => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = sigmoid(x);
            }
        }
        Op::Softmax => {
            let p = softmax(a);
            out.copy_from_slice(&p);
        }
        Op::GtMask => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = if x > 0.0 { 1.0 } else { 0.0 };
            }
        }
        Op::LeakyMask(s) => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = if x > 0.0 { 1.0 } else { *s };
            }
        }
        Op::Sqrt => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x.sqrt();
            }
        }
        Op::AddConst(c) => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x + c;
            }
        }
        Op::Scale(c) => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o = x * c;
            }
        }
        Op::Sum => out[0] = a.iter().sum(),
        Op::Mean => out[0] = a.iter().sum::<f64>() / a.len() as f64,
        Op::Pick(i) => out[0] = a[*i],
        _ => unreachable!("not a unary op"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient_matches_analytic() {
        // f(x) = x^2 at x = 3 has df/dx = 6.
        let mut g = ValueGraph::new();
        let x = g.variable(vec![3.0]);
        let y = g.mul(x, x);
        g.backward(y).unwrap();
        assert!((g.grad(x)[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut g = ValueGraph::new();
        let x = g.variable(vec![0.0]);
        let s = g.activation(x, Activation::Sigmoid);
        g.backward(s).unwrap();
        assert!((g.grad(x)[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn backward_rejects_vector_root() {
        let mut g = ValueGraph::new();
        let x = g.variable(vec![1.0, 2.0]);
        let y = g.scale(x, 2.0);
        assert!(matches!(g.backward(y), Err(CoreError::NonScalarRoot(2))));
    }

    #[test]
    fn refresh_recomputes_in_place() {
        let mut g = ValueGraph::new();
        let x = g.variable(vec![1.0, 2.0]);
        let y = g.scale(x, 3.0);
        let s = g.sum(y);
        assert_eq!(g.scalar_value(s), 9.0);
        g.set_value(x, &[2.0, 2.0]);
        g.refresh();
        assert_eq!(g.scalar_value(s), 12.0);
    }

    #[test]
    fn grads_zeroed_between_backward_calls() {
        let mut g = ValueGraph::new();
        let x = g.variable(vec![2.0]);
        let y = g.mul(x, x);
        g.backward(y).unwrap();
        let first = g.grad(x)[0];
        g.backward(y).unwrap();
        assert_eq!(first, g.grad(x)[0]);
    }

    #[test]
    fn softmax_values_form_probability_vector() {
        let mut g = ValueGraph::new();
        let x = g.variable(vec![0.0, 0.0]);
        let p = g.activation(x, Activation::Softmax);
        assert_eq!(g.value(p), &[0.5, 0.5]);
        let x2 = g.variable(vec![1000.0, -1000.0, 3.0]);
        let p2 = g.activation(x2, Activation::Softmax);
        let total: f64 = g.value(p2).iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(g.value(p2).iter().all(|&v| v.is_finite()));
    }

    #[test]
    fn matvec_transpose_agrees_with_matvec_on_transposed_matrix() {
        // y = W^T x computed by MatVecT must equal matvec of the manually
        // transposed matrix.
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let x = vec![0.5, -1.5];
        let mut g = ValueGraph::new();
        let wn = g.variable(w.clone());
        let xn = g.variable(x.clone());
        let y = g.matvec_t(wn, xn, 2, 3);
        let mut wt = vec![0.0; 6]; // 3x2
        for r in 0..2 {
            for c in 0..3 {
                wt[c * 2 + r] = w[r * 3 + c];
            }
        }
        let mut g2 = ValueGraph::new();
        let wtn = g2.variable(wt);
        let xn2 = g2.variable(x);
        let y2 = g2.matvec(wtn, xn2, 3, 2);
        for (a, b) in g.value(y).iter().zip(g2.value(y2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
