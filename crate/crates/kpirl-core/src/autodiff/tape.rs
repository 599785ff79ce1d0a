//! Wengert-list reverse-mode differentiation.
//!
//! Every primitive op appends a node holding its operands and its eagerly
//! computed value. The reverse sweep is itself emitted as more nodes on the
//! same tape, so gradients stay differentiable and mixed second-order terms
//! (gradient of a function of a gradient) come out of a second sweep with no
//! extra machinery.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

static TAPE_IDS: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Log(NodeId),
    Exp(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Concat(Vec<NodeId>),
    Slice {
        src: NodeId,
        start: usize,
        len: usize,
    },
    Clamp {
        src: NodeId,
        lo: f64,
        hi: f64,
    },
    Transpose(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Arc<Tensor>,
}

/// A value that may live on a tape. Constants carry no node and can be mixed
/// into any expression; they are interned as untracked leaves on first use.
#[derive(Debug, Clone)]
pub struct DualValue {
    value: Arc<Tensor>,
    tape_id: u64,
    node: Option<NodeId>,
}

impl DualValue {
    /// Off-tape constant. Gradients never flow into it.
    pub fn constant(t: Tensor) -> Self {
        DualValue {
            value: Arc::new(t),
            tape_id: 0,
            node: None,
        }
    }

    pub fn constant_scalar(v: f64) -> Self {
        Self::constant(Tensor::scalar(v))
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn scalar(&self) -> Result<f64> {
        self.value.scalar_value()
    }

    pub fn node(&self) -> Option<NodeId> {
        self.node
    }

    /// Detached copy of the underlying tensor.
    pub fn detach(&self) -> Tensor {
        (*self.value).clone()
    }
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: TAPE_IDS.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Tracked leaf: a differentiation root.
    pub fn var(&mut self, t: Tensor) -> DualValue {
        self.push(Op::Leaf, Arc::new(t))
    }

    fn push(&mut self, op: Op, value: Arc<Tensor>) -> DualValue {
        let id = self.nodes.len();
        self.nodes.push(Node {
            op,
            value: Arc::clone(&value),
        });
        DualValue {
            value,
            tape_id: self.id,
            node: Some(id),
        }
    }

    fn value_of(&self, id: NodeId) -> Arc<Tensor> {
        Arc::clone(&self.nodes[id].value)
    }

    fn node_ref(&self, id: NodeId) -> DualValue {
        DualValue {
            value: self.value_of(id),
            tape_id: self.id,
            node: Some(id),
        }
    }

    /// Node id for an operand, interning off-tape constants as untracked
    /// leaves. A value recorded on some other tape is rejected.
    fn operand(&mut self, v: &DualValue) -> Result<NodeId> {
        match v.node {
            Some(id) if v.tape_id == self.id => Ok(id),
            Some(_) => Err(Error::UnknownNode),
            None => {
                let d = self.push(Op::Leaf, Arc::clone(&v.value));
                Ok(d.node.unwrap())
            }
        }
    }

    fn binary(
        &mut self,
        a: &DualValue,
        b: &DualValue,
        make: impl Fn(NodeId, NodeId) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DualValue> {
        let va = a.value.broadcast_zip(&b.value, f)?;
        let (ia, ib) = (self.operand(a)?, self.operand(b)?);
        Ok(self.push(make(ia, ib), Arc::new(va)))
    }

    fn unary(
        &mut self,
        a: &DualValue,
        make: impl Fn(NodeId) -> Op,
        f: impl Fn(f64) -> f64,
    ) -> Result<DualValue> {
        let va = a.value.map(f);
        let ia = self.operand(a)?;
        Ok(self.push(make(ia), Arc::new(va)))
    }

    pub fn add(&mut self, a: &DualValue, b: &DualValue) -> Result<DualValue> {
        self.binary(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: &DualValue, b: &DualValue) -> Result<DualValue> {
        self.binary(a, b, Op::Sub, |x, y| x - y)
    }

    /// Elementwise product (with scalar and row broadcasting).
    pub fn mul(&mut self, a: &DualValue, b: &DualValue) -> Result<DualValue> {
        self.binary(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn matmul(&mut self, a: &DualValue, b: &DualValue) -> Result<DualValue> {
        let va = a.value.matmul(&b.value)?;
        let (ia, ib) = (self.operand(a)?, self.operand(b)?);
        Ok(self.push(Op::MatMul(ia, ib), Arc::new(va)))
    }

    pub fn tanh(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Tanh, f64::tanh)
    }

    pub fn relu(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    /// log(1 + exp(x)) in the overflow-free form, so large positive inputs
    /// come back as x and large negative ones stay strictly positive for
    /// as long as exp(x) is representable.
    pub fn softplus(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Softplus, |x| x.max(0.0) + (-x.abs()).exp().ln_1p())
    }

    pub fn log(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Log, f64::ln)
    }

    pub fn exp(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Exp, f64::exp)
    }

    pub fn square(&mut self, a: &DualValue) -> Result<DualValue> {
        self.unary(a, Op::Square, |x| x * x)
    }

    pub fn sum(&mut self, a: &DualValue) -> Result<DualValue> {
        let v = Tensor::scalar(a.value.sum());
        let ia = self.operand(a)?;
        Ok(self.push(Op::Sum(ia), Arc::new(v)))
    }

    pub fn mean(&mut self, a: &DualValue) -> Result<DualValue> {
        let v = Tensor::scalar(a.value.mean());
        let ia = self.operand(a)?;
        Ok(self.push(Op::Mean(ia), Arc::new(v)))
    }

    pub fn concat_cols(&mut self, parts: &[&DualValue]) -> Result<DualValue> {
        let tensors: Vec<&Tensor> = parts.iter().map(|p| p.value()).collect();
        let v = Tensor::concat_cols(&tensors)?;
        let mut ids = Vec::with_capacity(parts.len());
        for p in parts {
            ids.push(self.operand(p)?);
        }
        Ok(self.push(Op::Concat(ids), Arc::new(v)))
    }

    pub fn slice_cols(&mut self, a: &DualValue, start: usize, len: usize) -> Result<DualValue> {
        let v = a.value.slice_cols(start, len)?;
        let ia = self.operand(a)?;
        Ok(self.push(
            Op::Slice {
                src: ia,
                start,
                len,
            },
            Arc::new(v),
        ))
    }

    pub fn clamp(&mut self, a: &DualValue, lo: f64, hi: f64) -> Result<DualValue> {
        let v = a.value.clamp(lo, hi);
        let ia = self.operand(a)?;
        Ok(self.push(Op::Clamp { src: ia, lo, hi }, Arc::new(v)))
    }

    pub fn transpose(&mut self, a: &DualValue) -> Result<DualValue> {
        let v = a.value.transpose();
        let ia = self.operand(a)?;
        Ok(self.push(Op::Transpose(ia), Arc::new(v)))
    }

    /// Convenience: a * scalar constant.
    pub fn scale(&mut self, a: &DualValue, k: f64) -> Result<DualValue> {
        let k = DualValue::constant_scalar(k);
        self.mul(a, &k)
    }

    /// Gradients of a scalar output with respect to `inputs`, as detached
    /// tensors. Inputs unreachable from the output get zeros. The sweep is
    /// recorded on the tape like any other computation.
    pub fn grad(&mut self, output: &DualValue, inputs: &[&DualValue]) -> Result<Vec<Tensor>> {
        let g = self.grad_as_graph(output, inputs)?;
        Ok(g.into_iter().map(|d| d.detach()).collect())
    }

    /// Gradients of a scalar output with respect to `inputs`, left on the
    /// tape as live nodes so further expressions (and further sweeps) can be
    /// built on top of them.
    pub fn grad_as_graph(
        &mut self,
        output: &DualValue,
        inputs: &[&DualValue],
    ) -> Result<Vec<DualValue>> {
        if !output.value.is_scalar() {
            return Err(Error::shape(
                "grad output",
                "1x1 scalar",
                output.value.shape_str(),
            ));
        }
        let out_id = match output.node {
            Some(id) if output.tape_id == self.id => id,
            _ => return Err(Error::UnknownNode),
        };
        let mut input_ids = Vec::with_capacity(inputs.len());
        for v in inputs {
            match v.node {
                Some(id) if v.tape_id == self.id => input_ids.push(id),
                _ => return Err(Error::UnknownNode),
            }
        }

        // Adjoints are indexed by primal node id; nodes appended by the
        // sweep itself have larger ids and are never revisited, so the
        // single downward pass touches each primal node exactly once.
        let mut adjoint: Vec<Option<NodeId>> = vec![None; out_id + 1];
        let seed = self.var(Tensor::scalar(1.0));
        adjoint[out_id] = seed.node;

        for id in (0..=out_id).rev() {
            let Some(adj_id) = adjoint[id] else { continue };
            let op = self.nodes[id].op.clone();
            self.backprop_node(id, adj_id, &op, &mut adjoint)?;
        }

        let mut grads = Vec::with_capacity(input_ids.len());
        for (v, id) in inputs.iter().zip(input_ids) {
            match adjoint.get(id).copied().flatten() {
                Some(a) => grads.push(self.node_ref(a)),
                None => {
                    let (r, c) = v.value.shape();
                    grads.push(self.push(Op::Leaf, Arc::new(Tensor::zeros(r, c))));
                }
            }
        }
        Ok(grads)
    }

    fn accumulate(
        &mut self,
        adjoint: &mut [Option<NodeId>],
        target: NodeId,
        contrib: DualValue,
    ) -> Result<()> {
        let contrib_id = contrib.node.expect("contribution is always on tape");
        adjoint[target] = Some(match adjoint[target] {
            None => contrib_id,
            Some(prev) => {
                let prev = self.node_ref(prev);
                let merged = self.add(&prev, &contrib)?;
                merged.node.unwrap()
            }
        });
        Ok(())
    }

    /// Emits the vector-Jacobian product of one node into its operands'
    /// adjoints. Contributions are built from live nodes wherever the local
    /// derivative depends on a primal value, which is what keeps the emitted
    /// sweep differentiable in its own right. Gate masks (relu, clamp) are
    /// piecewise constant and enter as plain constants.
    fn backprop_node(
        &mut self,
        id: NodeId,
        adj_id: NodeId,
        op: &Op,
        adjoint: &mut Vec<Option<NodeId>>,
    ) -> Result<()> {
        let adj = self.node_ref(adj_id);
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let ga = self.reduce_to_shape(&adj, self.nodes[a].value.shape())?;
                self.accumulate(adjoint, a, ga)?;
                let gb = self.reduce_to_shape(&adj, self.nodes[b].value.shape())?;
                self.accumulate(adjoint, b, gb)?;
            }
            Op::Sub(a, b) => {
                let ga = self.reduce_to_shape(&adj, self.nodes[a].value.shape())?;
                self.accumulate(adjoint, a, ga)?;
                let gb = self.reduce_to_shape(&adj, self.nodes[b].value.shape())?;
                let gb = self.scale(&gb, -1.0)?;
                self.accumulate(adjoint, b, gb)?;
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.node_ref(a), self.node_ref(b));
                let ga = self.mul(&adj, &vb)?;
                let ga = self.reduce_to_shape(&ga, self.nodes[a].value.shape())?;
                self.accumulate(adjoint, a, ga)?;
                let gb = self.mul(&adj, &va)?;
                let gb = self.reduce_to_shape(&gb, self.nodes[b].value.shape())?;
                self.accumulate(adjoint, b, gb)?;
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.node_ref(a), self.node_ref(b));
                let bt = self.transpose(&vb)?;
                let ga = self.matmul(&adj, &bt)?;
                self.accumulate(adjoint, a, ga)?;
                let at = self.transpose(&va)?;
                let gb = self.matmul(&at, &adj)?;
                self.accumulate(adjoint, b, gb)?;
            }
            Op::Tanh(a) => {
                let out = self.node_ref(id);
                let sq = self.square(&out)?;
                let one = DualValue::constant_scalar(1.0);
                let d = self.sub(&one, &sq)?;
                let g = self.mul(&adj, &d)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Relu(a) => {
                let mask = self.nodes[a].value.map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                let g = self.mul(&adj, &DualValue::constant(mask))?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Sigmoid(a) => {
                let out = self.node_ref(id);
                let one = DualValue::constant_scalar(1.0);
                let om = self.sub(&one, &out)?;
                let d = self.mul(&out, &om)?;
                let g = self.mul(&adj, &d)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Softplus(a) => {
                let va = self.node_ref(a);
                let d = self.sigmoid(&va)?;
                let g = self.mul(&adj, &d)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Log(a) => {
                // 1/x as exp(-log x), which reuses the already computed output.
                let out = self.node_ref(id);
                let neg = self.scale(&out, -1.0)?;
                let inv = self.exp(&neg)?;
                let g = self.mul(&adj, &inv)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Exp(a) => {
                let out = self.node_ref(id);
                let g = self.mul(&adj, &out)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Square(a) => {
                let va = self.node_ref(a);
                let two_a = self.scale(&va, 2.0)?;
                let g = self.mul(&adj, &two_a)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Sum(a) => {
                let (r, c) = self.nodes[a].value.shape();
                let ones = DualValue::constant(Tensor::ones(r, c));
                let g = self.mul(&ones, &adj)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Mean(a) => {
                let (r, c) = self.nodes[a].value.shape();
                let n = (r * c) as f64;
                let spread = DualValue::constant(Tensor::full(r, c, 1.0 / n));
                let g = self.mul(&spread, &adj)?;
                self.accumulate(adjoint, a, g)?;
            }
            Op::Concat(ref parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.nodes[p].value.cols();
                    let g = self.slice_cols(&adj, start, w)?;
                    self.accumulate(adjoint, p, g)?;
                    start += w;
                }
            }
            Op::Slice { src, start, len } => {
                let (r, c) = self.nodes[src].value.shape();
                let mut parts: Vec<DualValue> = Vec::with_capacity(3);
                if start > 0 {
                    parts.push(DualValue::constant(Tensor::zeros(r, start)));
                }
                parts.push(adj.clone());
                if start + len < c {
                    parts.push(DualValue::constant(Tensor::zeros(r, c - start - len)));
                }
                let refs: Vec<&DualValue> = parts.iter().collect();
                let g = self.concat_cols(&refs)?;
                self.accumulate(adjoint, src, g)?;
            }
            Op::Clamp { src, lo, hi } => {
                let mask = self.nodes[src]
                    .value
                    .map(|x| if x >= lo && x <= hi { 1.0 } else { 0.0 });
                let g = self.mul(&adj, &DualValue::constant(mask))?;
                self.accumulate(adjoint, src, g)?;
            }
            Op::Transpose(a) => {
                let g = self.transpose(&adj)?;
                self.accumulate(adjoint, a, g)?;
            }
        }
        Ok(())
    }

    /// Collapses a broadcast gradient back to the operand's shape: full sum
    /// for a scalar operand, a ones-row contraction for a row operand.
    fn reduce_to_shape(&mut self, g: &DualValue, target: (usize, usize)) -> Result<DualValue> {
        let have = g.value.shape();
        if have == target {
            return Ok(g.clone());
        }
        if target == (1, 1) {
            return self.sum(g);
        }
        if target.0 == 1 && target.1 == have.1 {
            let ones = DualValue::constant(Tensor::ones(1, have.0));
            return self.matmul(&ones, g);
        }
        Err(Error::shape(
            "gradient reduction",
            format!("{}x{}", target.0, target.1),
            g.value.shape_str(),
        ))
    }
}
