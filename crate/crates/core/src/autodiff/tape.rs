use std::fmt;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryKind {
    Relu,
    Tanh,
    Cube,
    Sin,
    Exp,
    Abs,
    Neg,
    Scale(f64),
    AddConst(f64),
}

impl UnaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            UnaryKind::Relu => "relu",
            UnaryKind::Tanh => "tanh",
            UnaryKind::Cube => "cube",
            UnaryKind::Sin => "sin",
            UnaryKind::Exp => "exp",
            UnaryKind::Abs => "abs",
            UnaryKind::Neg => "neg",
            UnaryKind::Scale(_) => "scale",
            UnaryKind::AddConst(_) => "add_const",
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            UnaryKind::Relu => x.max(0.0),
            UnaryKind::Tanh => x.tanh(),
            UnaryKind::Cube => x * x * x,
            UnaryKind::Sin => x.sin(),
            UnaryKind::Exp => x.exp(),
            UnaryKind::Abs => x.abs(),
            UnaryKind::Neg => -x,
            UnaryKind::Scale(c) => c * x,
            UnaryKind::AddConst(c) => x + c,
        }
    }

    /// Derivative given the input `x` and the forward output `y`.
    pub fn derivative(&self, x: f64, y: f64) -> f64 {
        match *self {
            // relu'(0) = 0
            UnaryKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryKind::Tanh => 1.0 - y * y,
            UnaryKind::Cube => 3.0 * x * x,
            UnaryKind::Sin => x.cos(),
            UnaryKind::Exp => y,
            UnaryKind::Abs => sign(x),
            UnaryKind::Neg => -1.0,
            UnaryKind::Scale(c) => c,
            UnaryKind::AddConst(_) => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
}

/// `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Backward rule for operations defined outside this module.
///
/// Returns one gradient per input (same length as that input's data), or
/// `None` for inputs that receive no gradient.
pub trait Backward: Send {
    fn name(&self) -> &str;

    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        upstream: &[f64],
    ) -> Vec<Option<Vec<f64>>>;
}

enum Op {
    Leaf,
    MatMul,
    AddBias,
    Add,
    Sub,
    Mul,
    Unary(UnaryKind),
    Reduce(ReduceKind),
    L1Loss,
    CrossEntropy { labels: Vec<usize>, probs: Vec<f64> },
    Custom(Box<dyn Backward>),
}

impl Op {
    fn name(&self) -> &str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::AddBias => "add_bias",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Unary(k) => k.name(),
            Op::Reduce(ReduceKind::Sum) => "sum",
            Op::Reduce(ReduceKind::Mean) => "mean",
            Op::L1Loss => "l1_loss",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Custom(b) => b.name(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    inputs: Vec<usize>,
}

/// Records operations in execution order so that a reverse sweep can apply
/// the chain rule. Node indices are topologically sorted by construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.nodes.iter().map(|n| (n.op.name(), n.value.shape())))
            .finish()
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

    /// Records a leaf; its gradient is tracked iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push(tensor, Op::Leaf, Vec::new())
    }

    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn op_name(&self, v: Var) -> &str {
        self.nodes[v.0].op.name()
    }

    pub fn zero_grad(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.value.clear_grad());
    }

    fn push(&mut self, mut value: Tensor, op: Op, inputs: Vec<usize>) -> Var {
        if !matches!(op, Op::Leaf) {
            let rg = inputs.iter().any(|&i| self.nodes[i].value.requires_grad());
            value.set_requires_grad(rg);
        }
        self.nodes.push(Node { value, op, inputs });
        Var(self.nodes.len() - 1)
    }

    /// Records an externally defined operation whose forward value has
    /// already been computed.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, rule: Box<dyn Backward>) -> Var {
        self.push(
            output,
            Op::Custom(rule),
            inputs.iter().map(|v| v.0).collect(),
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(t, Op::MatMul, vec![a.0, b.0]))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        if tx.rank() != 2 || tb.rank() != 1 || tx.shape()[1] != tb.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: tx.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let n = tb.numel();
        let mut out = tx.data().to_vec();
        for row in out.chunks_mut(n) {
            row.iter_mut().zip(tb.data()).for_each(|(o, b)| *o += b);
        }
        let t = Tensor::new(tx.shape().to_vec(), out)?;
        Ok(self.push(t, Op::AddBias, vec![x.0, b.0]))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::ShapeMismatch {
                op: match op {
                    Op::Add => "add",
                    Op::Sub => "sub",
                    _ => "mul",
                },
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let out = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.shape().to_vec(), out)?;
        Ok(self.push(t, op, vec![a.0, b.0]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn unary(&mut self, x: Var, kind: UnaryKind) -> Var {
        let tx = self.value(x);
        let out = tx.data().iter().map(|&v| kind.apply(v)).collect();
        let t = Tensor::new(tx.shape().to_vec(), out).expect("same shape");
        self.push(t, Op::Unary(kind), vec![x.0])
    }

    pub fn reduce(&mut self, x: Var, kind: ReduceKind) -> Result<Var> {
        let tx = self.value(x);
        if tx.numel() == 0 {
            return Err(Error::Empty(match kind {
                ReduceKind::Sum => "sum",
                ReduceKind::Mean => "mean",
            }));
        }
        let s: f64 = tx.data().iter().sum();
        let v = match kind {
            ReduceKind::Sum => s,
            ReduceKind::Mean => s / tx.numel() as f64,
        };
        Ok(self.push(Tensor::scalar(v), Op::Reduce(kind), vec![x.0]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, ReduceKind::Sum)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, ReduceKind::Mean)
    }

    /// Mean absolute error over all elements.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (tp, tt) = (self.value(pred), self.value(target));
        if tp.shape() != tt.shape() {
            return Err(Error::ShapeMismatch {
                op: "l1_loss",
                lhs: tp.shape().to_vec(),
                rhs: tt.shape().to_vec(),
            });
        }
        if tp.numel() == 0 {
            return Err(Error::Empty("l1_loss"));
        }
        let s: f64 = tp
            .data()
            .iter()
            .zip(tt.data())
            .map(|(p, t)| (p - t).abs())
            .sum();
        let v = s / tp.numel() as f64;
        Ok(self.push(Tensor::scalar(v), Op::L1Loss, vec![pred.0, target.0]))
    }

    /// Mean negative log-softmax at the labelled class, max-shifted per row.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        if tl.rank() != 2 || tl.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: tl.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let (m, c) = (tl.shape()[0], tl.shape()[1]);
        if m == 0 {
            return Err(Error::Empty("cross_entropy"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let mut probs = vec![0.0; m * c];
        let mut total = 0.0;
        for (i, row) in tl.data().chunks(c).enumerate() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            let log_z = z.ln() + mx;
            total += log_z - row[labels[i]];
            for j in 0..c {
                probs[i * c + j] = (row[j] - log_z).exp();
            }
        }
        let op = Op::CrossEntropy {
            labels: labels.to_vec(),
            probs,
        };
        Ok(self.push(Tensor::scalar(total / m as f64), op, vec![logits.0]))
    }

    /// Accumulates d(loss)/d(node) into every gradient-tracking node
    /// reachable from `loss`. Repeated calls add to existing gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).numel() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.value.requires_grad() {
                continue;
            }
            let input_grads = self.local_backward(idx, &g);
            for (&inp, ig) in self.nodes[idx].inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !self.nodes[inp].value.requires_grad() {
                    continue;
                }
                match &mut grads[inp] {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(ig),
                }
            }
            self.nodes[idx].value.accumulate_grad(&g);
        }
        Ok(())
    }

    fn local_backward(&self, idx: usize, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let node = &self.nodes[idx];
        let input = |k: usize| &self.nodes[node.inputs[k]].value;
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul => {
                let (a, b) = (input(0), input(1));
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                // dA = G·Bᵀ, dB = Aᵀ·G
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += g[i * n + j] * b.data()[p * n + j];
                        }
                        da[i * k + p] = s;
                    }
                }
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let a_ip = a.data()[i * k + p];
                        let row = &g[i * n..(i + 1) * n];
                        db[p * n..(p + 1) * n]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(d, gv)| *d += a_ip * gv);
                    }
                }
                vec![Some(da), Some(db)]
            }
            Op::AddBias => {
                let n = input(1).numel();
                let mut db = vec![0.0; n];
                for row in g.chunks(n) {
                    db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                }
                vec![Some(g.to_vec()), Some(db)]
            }
            Op::Add => vec![Some(g.to_vec()), Some(g.to_vec())],
            Op::Sub => vec![Some(g.to_vec()), Some(g.iter().map(|v| -v).collect())],
            Op::Mul => {
                let (a, b) = (input(0), input(1));
                let da = g.iter().zip(b.data()).map(|(g, b)| g * b).collect();
                let db = g.iter().zip(a.data()).map(|(g, a)| g * a).collect();
                vec![Some(da), Some(db)]
            }
            Op::Unary(kind) => {
                let x = input(0);
                let dx = x
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .zip(g)
                    .map(|((&xv, &yv), &gv)| gv * kind.derivative(xv, yv))
                    .collect();
                vec![Some(dx)]
            }
            Op::Reduce(kind) => {
                let n = input(0).numel();
                let v = match kind {
                    ReduceKind::Sum => g[0],
                    ReduceKind::Mean => g[0] / n as f64,
                };
                vec![Some(vec![v; n])]
            }
            Op::L1Loss => {
                let (p, t) = (input(0), input(1));
                let scale = g[0] / p.numel() as f64;
                let dp: Vec<f64> = p
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(pv, tv)| scale * sign(pv - tv))
                    .collect();
                let dt = dp.iter().map(|v| -v).collect();
                vec![Some(dp), Some(dt)]
            }
            Op::CrossEntropy { labels, probs } => {
                let m = labels.len();
                let c = probs.len() / m;
                let scale = g[0] / m as f64;
                let mut d = probs.clone();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * c + l] -= 1.0;
                }
                d.iter_mut().for_each(|v| *v *= scale);
                vec![Some(d)]
            }
            Op::Custom(rule) => {
                let inputs: Vec<&Tensor> =
                    node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
                rule.backward(&inputs, &node.value, g)
            }
        }
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            row.iter_mut()
                .zip(&b[p * n..(p + 1) * n])
                .for_each(|(o, bv)| *o += a_ip * bv);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let mut t = Tape::new();
        let a = t.constant(mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let b = t.constant(mat(&[vec![3.0], vec![4.0]]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).data(), &[3.0, 4.0]);
        assert_eq!(t.value(c).shape(), &[2, 1]);
    }

    #[test]
    fn scalar_matmul_product_rule() {
        let mut t = Tape::new();
        let a = t.param(mat(&[vec![2.0]]));
        let b = t.param(mat(&[vec![3.0]]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).data(), &[6.0]);
        t.backward(c).unwrap();
        assert_eq!(t.grad(a).unwrap(), &[3.0]);
        assert_eq!(t.grad(b).unwrap(), &[2.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        let msg = t.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn add_bias_broadcasts_rows() {
        let mut t = Tape::new();
        let x = t.constant(mat(&[vec![1.0, 2.0]]));
        let b = t.constant(Tensor::vector(vec![0.0, 0.0]));
        let y = t.add_bias(x, b).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, 2.0]);

        let x = t.constant(mat(&[vec![1.0], vec![2.0]]));
        let b = t.param(Tensor::vector(vec![10.0]));
        let y = t.add_bias(x, b).unwrap();
        assert_eq!(t.value(y).data(), &[11.0, 12.0]);
        let s = t.sum(y).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(b).unwrap(), &[2.0]);

        let bad = t.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(t.add_bias(x, bad).is_err());
    }

    #[test]
    fn unary_definitions() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![-1.5, 2.0, 0.0]));
        let r = t.unary(x, UnaryKind::Relu);
        assert_eq!(t.value(r).data(), &[0.0, 2.0, 0.0]);
        let x = t.constant(Tensor::scalar(0.5));
        let c = t.unary(x, UnaryKind::Cube);
        assert_eq!(t.value(c).item(), 0.125);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![0.0, 1.0, -1.0]));
        let r = t.unary(x, UnaryKind::Relu);
        let s = t.sum(r).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn reductions() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = t.sum(x).unwrap();
        assert_eq!(t.value(s).item(), 6.0);
        let m = t.mean(x).unwrap();
        assert_eq!(t.value(m).item(), 2.0);
        t.backward(m).unwrap();
        for g in t.grad(x).unwrap() {
            assert!((g - 1.0 / 3.0).abs() < 1e-15);
        }
        let e = t.constant(Tensor::vector(vec![]));
        assert!(matches!(t.sum(e), Err(Error::Empty("sum"))));
    }

    #[test]
    fn l1_loss_values_and_tie_gradient() {
        let mut t = Tape::new();
        let p = t.param(mat(&[vec![1.0], vec![-1.0]]));
        let y = t.constant(mat(&[vec![0.0], vec![0.0]]));
        let l = t.l1_loss(p, y).unwrap();
        assert_eq!(t.value(l).item(), 1.0);

        let q = t.param(mat(&[vec![0.5], vec![2.0]]));
        let y2 = t.constant(mat(&[vec![0.5], vec![1.0]]));
        let l2 = t.l1_loss(q, y2).unwrap();
        assert_eq!(t.value(l2).item(), 0.5);
        t.backward(l2).unwrap();
        assert_eq!(t.grad(q).unwrap(), &[0.0, 0.5]);

        let bad = t.constant(Tensor::zeros(&[3, 1]));
        assert!(t.l1_loss(p, bad).is_err());
    }

    #[test]
    fn cross_entropy_uniform_and_stable() {
        let mut t = Tape::new();
        let z = t.constant(mat(&[vec![0.0, 0.0]]));
        let l = t.cross_entropy(z, &[0]).unwrap();
        assert!((t.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);

        let z = t.constant(mat(&[vec![1000.0, 0.0]]));
        let l = t.cross_entropy(z, &[0]).unwrap();
        let v = t.value(l).item();
        assert!(v.is_finite() && v.abs() < 1e-12, "{v}");

        assert!(matches!(
            t.cross_entropy(z, &[2]),
            Err(Error::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn sum_backward_is_ones() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn reused_tensor_accumulates() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(vec![1.0, 2.0]));
        let w = t.param(Tensor::vector(vec![0.5, 0.5]));
        let once = {
            let mut t1 = Tape::new();
            let x1 = t1.constant(Tensor::vector(vec![1.0, 2.0]));
            let w1 = t1.param(Tensor::vector(vec![0.5, 0.5]));
            let p = t1.mul(x1, w1).unwrap();
            let s = t1.sum(p).unwrap();
            t1.backward(s).unwrap();
            t1.grad(w1).unwrap().to_vec()
        };
        let p1 = t.mul(x, w).unwrap();
        let p2 = t.mul(x, w).unwrap();
        let both = t.add(p1, p2).unwrap();
        let s = t.sum(both).unwrap();
        t.backward(s).unwrap();
        let twice: Vec<f64> = once.iter().map(|g| 2.0 * g).collect();
        assert_eq!(t.grad(w).unwrap(), twice.as_slice());
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(vec![1.0, 2.0]));
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 2.0]);
        t.zero_grad();
        assert!(t.grad(x).is_none());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::vector(vec![1.0]));
        let x = t.param(Tensor::vector(vec![2.0]));
        let p = t.mul(c, x).unwrap();
        let s = t.sum(p).unwrap();
        t.backward(s).unwrap();
        assert!(t.grad(c).is_none());
        assert_eq!(t.grad(x).unwrap(), &[1.0]);
    }
}
