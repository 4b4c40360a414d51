use super::ops::{self, gemm};
use super::trig;
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Matmul(Var, Var),
    Affine { x: Var, w: Var, b: Var },
    Tanh(Var),
    Relu(Var),
    /// Keeps `ω·cos(ω·x)` for the backward pass.
    Sine { x: Var, slope: Vec<f64> },
    DotHidden { branch: Var, trunk: Var },
    Fuse { branch: Var, trunk: Var },
    ContractVector { branch: Var, trunk: Var },
    Reshape(Var),
    Mul(Var, Var),
    Sum(Var),
    Mse { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations in execution order; nodes are only ever appended, so
/// every input id is smaller than the id of the node consuming it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every tape node that needs one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Untracked input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input whose gradient is wanted (used by gradient checks).
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(value, Op::Matmul(a, b), g))
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let value = ops::affine(self.value(x), self.value(w), self.value(b))?;
        let g = self.grad_of(&[x, w, b]);
        Ok(self.push(value, Op::Affine { x, w, b }, g))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = ops::tanh_activation(self.value(x));
        let g = self.grad_of(&[x]);
        self.push(value, Op::Tanh(x), g)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = ops::relu_activation(self.value(x));
        let g = self.grad_of(&[x]);
        self.push(value, Op::Relu(x), g)
    }

    pub fn sine(&mut self, x: Var, omega: f64) -> Var {
        let g = self.grad_of(&[x]);
        if !g {
            let value = ops::sine_activation(self.value(x), omega);
            return self.push(value, Op::Sine { x, slope: Vec::new() }, g);
        }
        let input = self.value(x);
        let mut data = Vec::with_capacity(input.numel());
        let mut slope = Vec::with_capacity(input.numel());
        for &v in input.data() {
            let (s, c) = trig::sin_cos(omega * v);
            data.push(s);
            slope.push(omega * c);
        }
        let value = Tensor::new(input.shape().to_vec(), data).expect("same shape as input");
        self.push(value, Op::Sine { x, slope }, g)
    }

    pub fn dot_hidden(&mut self, branch: Var, trunk: Var) -> Result<Var> {
        let value = ops::dot_hidden(self.value(branch), self.value(trunk))?;
        let g = self.grad_of(&[branch, trunk]);
        Ok(self.push(value, Op::DotHidden { branch, trunk }, g))
    }

    pub fn fuse(&mut self, branch: Var, trunk: Var) -> Result<Var> {
        let value = ops::fuse(self.value(branch), self.value(trunk))?;
        let g = self.grad_of(&[branch, trunk]);
        Ok(self.push(value, Op::Fuse { branch, trunk }, g))
    }

    pub fn contract_vector(&mut self, branch: Var, trunk: Var) -> Result<Var> {
        let value = ops::contract_vector(self.value(branch), self.value(trunk))?;
        let g = self.grad_of(&[branch, trunk]);
        Ok(self.push(value, Op::ContractVector { branch, trunk }, g))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let g = self.grad_of(&[x]);
        Ok(self.push(value, Op::Reshape(x), g))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim("mul", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), g))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let g = self.grad_of(&[x]);
        self.push(value, Op::Sum(x), g)
    }

    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let value = ops::mse(self.value(pred), self.value(target))?;
        let g = self.grad_of(&[pred, target]);
        Ok(self.push(value, Op::Mse { pred, target }, g))
    }

    /// Reverse accumulation from a scalar, seeded with 1.0.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Writes parameter gradients into `store`; parameters that do not
    /// influence `loss` get zero gradients.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        store.zero_grad();
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(pid), Some(g)) = (&node.op, g) {
                store.get_mut(*pid).grad.add_assign(g);
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        // Borrowing helper: the slot for `v`, created as zeros on first use.
        fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'a mut Tensor {
            grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
        }

        match node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Matmul(a, b) => {
                let (ta, tb) = (val(a), val(b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if wants(a) {
                    let s = slot(grads, a, ta.shape());
                    gemm(m, n, k, g.data(), (n, 1), tb.data(), (1, n), 1.0, s.data_mut());
                }
                if wants(b) {
                    let s = slot(grads, b, tb.shape());
                    gemm(k, m, n, ta.data(), (1, k), g.data(), (n, 1), 1.0, s.data_mut());
                }
            }
            Op::Affine { x, w, b } => {
                let (tx, tw) = (val(x), val(w));
                let (rows, k) = tx.split_last();
                let n = tw.shape()[1];
                if wants(x) {
                    let s = slot(grads, x, tx.shape());
                    gemm(rows, n, k, g.data(), (n, 1), tw.data(), (1, n), 1.0, s.data_mut());
                }
                if wants(w) {
                    let s = slot(grads, w, tw.shape());
                    gemm(k, rows, n, tx.data(), (1, k), g.data(), (n, 1), 1.0, s.data_mut());
                }
                if wants(b) {
                    let s = slot(grads, b, &[n]).data_mut();
                    for row in g.data().chunks_exact(n) {
                        for (acc, v) in s.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
            }
            Op::Tanh(x) => {
                if wants(x) {
                    let y = node.value.data();
                    let s = slot(grads, x, node.value.shape()).data_mut();
                    for ((acc, gv), yv) in s.iter_mut().zip(g.data()).zip(y) {
                        *acc += gv * (1.0 - yv * yv);
                    }
                }
            }
            Op::Relu(x) => {
                if wants(x) {
                    let xin = val(x).data();
                    let s = slot(grads, x, node.value.shape()).data_mut();
                    for ((acc, gv), xv) in s.iter_mut().zip(g.data()).zip(xin) {
                        if *xv > 0.0 {
                            *acc += gv;
                        }
                    }
                }
            }
            Op::Sine { x, ref slope } => {
                if wants(x) {
                    let s = slot(grads, x, node.value.shape()).data_mut();
                    for ((acc, gv), d) in s.iter_mut().zip(g.data()).zip(slope) {
                        *acc += gv * d;
                    }
                }
            }
            Op::DotHidden { branch, trunk } => {
                let (tb, tt) = (val(branch), val(trunk));
                let (ni, nh) = (tt.shape()[1], tt.shape()[2]);
                if wants(branch) {
                    let s = slot(grads, branch, tb.shape()).data_mut();
                    for ((sb, tblock), gb) in s
                        .chunks_exact_mut(nh)
                        .zip(tt.data().chunks_exact(ni * nh))
                        .zip(g.data().chunks_exact(ni))
                    {
                        for (row, gv) in tblock.chunks_exact(nh).zip(gb) {
                            for (acc, t) in sb.iter_mut().zip(row) {
                                *acc += gv * t;
                            }
                        }
                    }
                }
                if wants(trunk) {
                    let s = slot(grads, trunk, tt.shape()).data_mut();
                    for ((sblock, bv), gb) in s
                        .chunks_exact_mut(ni * nh)
                        .zip(tb.data().chunks_exact(nh))
                        .zip(g.data().chunks_exact(ni))
                    {
                        for (row, gv) in sblock.chunks_exact_mut(nh).zip(gb) {
                            for (acc, b) in row.iter_mut().zip(bv) {
                                *acc += gv * b;
                            }
                        }
                    }
                }
            }
            Op::Fuse { branch, trunk } => {
                let (tb, tt) = (val(branch), val(trunk));
                let (ni, nh) = (tt.shape()[1], tt.shape()[2]);
                if wants(branch) {
                    let s = slot(grads, branch, tb.shape()).data_mut();
                    for ((sb, tblock), gblock) in s
                        .chunks_exact_mut(nh)
                        .zip(tt.data().chunks_exact(ni * nh))
                        .zip(g.data().chunks_exact(ni * nh))
                    {
                        for (trow, grow) in tblock.chunks_exact(nh).zip(gblock.chunks_exact(nh)) {
                            for ((acc, t), gv) in sb.iter_mut().zip(trow).zip(grow) {
                                *acc += gv * t;
                            }
                        }
                    }
                }
                if wants(trunk) {
                    let s = slot(grads, trunk, tt.shape()).data_mut();
                    for ((sblock, bv), gblock) in s
                        .chunks_exact_mut(ni * nh)
                        .zip(tb.data().chunks_exact(nh))
                        .zip(g.data().chunks_exact(ni * nh))
                    {
                        for (srow, grow) in sblock.chunks_exact_mut(nh).zip(gblock.chunks_exact(nh)) {
                            for ((acc, b), gv) in srow.iter_mut().zip(bv).zip(grow) {
                                *acc += gv * b;
                            }
                        }
                    }
                }
            }
            Op::ContractVector { branch, trunk } => {
                let (tb, tt) = (val(branch), val(trunk));
                let (ni, nh, nc) = (tt.shape()[1], tt.shape()[2], tt.shape()[3]);
                let hc = nh * nc;
                if wants(branch) {
                    let s = slot(grads, branch, tb.shape()).data_mut();
                    for ((sb, tblock), gb) in s
                        .chunks_exact_mut(hc)
                        .zip(tt.data().chunks_exact(ni * hc))
                        .zip(g.data().chunks_exact(ni * nc))
                    {
                        for (node_t, gnode) in tblock.chunks_exact(hc).zip(gb.chunks_exact(nc)) {
                            for (j, (acc, t)) in sb.iter_mut().zip(node_t).enumerate() {
                                *acc += gnode[j % nc] * t;
                            }
                        }
                    }
                }
                if wants(trunk) {
                    let s = slot(grads, trunk, tt.shape()).data_mut();
                    for ((sblock, bv), gb) in s
                        .chunks_exact_mut(ni * hc)
                        .zip(tb.data().chunks_exact(hc))
                        .zip(g.data().chunks_exact(ni * nc))
                    {
                        for (snode, gnode) in sblock.chunks_exact_mut(hc).zip(gb.chunks_exact(nc)) {
                            for (j, (acc, b)) in snode.iter_mut().zip(bv).enumerate() {
                                *acc += gnode[j % nc] * b;
                            }
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if wants(x) {
                    let s = slot(grads, x, val(x).shape()).data_mut();
                    for (acc, gv) in s.iter_mut().zip(g.data()) {
                        *acc += gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(a), val(b));
                if wants(a) {
                    let s = slot(grads, a, ta.shape()).data_mut();
                    for ((acc, gv), y) in s.iter_mut().zip(g.data()).zip(tb.data()) {
                        *acc += gv * y;
                    }
                }
                if wants(b) {
                    let s = slot(grads, b, tb.shape()).data_mut();
                    for ((acc, gv), x) in s.iter_mut().zip(g.data()).zip(ta.data()) {
                        *acc += gv * x;
                    }
                }
            }
            Op::Sum(x) => {
                if wants(x) {
                    let gv = g.data()[0];
                    let s = slot(grads, x, val(x).shape()).data_mut();
                    for acc in s.iter_mut() {
                        *acc += gv;
                    }
                }
            }
            Op::Mse { pred, target } => {
                let (tp, tt) = (val(pred), val(target));
                let scale = 2.0 * g.data()[0] / tp.numel() as f64;
                if wants(pred) {
                    let s = slot(grads, pred, tp.shape()).data_mut();
                    for ((acc, p), t) in s.iter_mut().zip(tp.data()).zip(tt.data()) {
                        *acc += scale * (p - t);
                    }
                }
                if wants(target) {
                    let s = slot(grads, target, tt.shape()).data_mut();
                    for ((acc, p), t) in s.iter_mut().zip(tp.data()).zip(tt.data()) {
                        *acc -= scale * (p - t);
                    }
                }
            }
        }
    }
}
