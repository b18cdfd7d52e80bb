//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every matrix operation of a forward pass as a node in a
//! flat arena; [`Tape::backward`] walks the arena in reverse and accumulates
//! exact gradients into a [`ParamStore`]. One tape spans one optimizer step
//! (typically a whole batch) and is discarded afterwards.
//!
//! Parameter values are copied into the tape once per tape on first use, so
//! repeated layers in a batch share the same leaf node.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::matrix::DenseMatrix;
use crate::nn::params::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Square(NodeId),
    MatMul(NodeId, NodeId),
    /// Adds a `1 x d` bias row to every row of the input.
    AddRowBias(NodeId, NodeId),
    /// Row v of the output is the sum of input rows over v's neighbors.
    NeighborSum(NodeId, Arc<Vec<Vec<usize>>>),
    /// Sum over rows: `n x d` -> `1 x d`.
    ColSum(NodeId),
    /// `1 x d` -> `n x d` by repetition.
    RepeatRows(NodeId),
    ConcatCols(NodeId, NodeId),
    /// Sum of the elementwise product with a constant mask: -> `1 x 1`.
    MaskSum(NodeId, DenseMatrix),
    /// Softmax cross-entropy of a `1 x C` logit row against a class id.
    CrossEntropy(NodeId, usize),
    /// Mean squared error against a constant target of the same shape.
    MseMean(NodeId, DenseMatrix),
    /// Mean absolute error against a constant target of the same shape.
    MaeMean(NodeId, DenseMatrix),
}

struct TapeNode {
    value: DenseMatrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    param_leaves: HashMap<ParamId, NodeId>,
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

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "scalar() on non-scalar node");
        v.get(0, 0)
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> NodeId {
        self.nodes.push(TapeNode { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Op::Const)
    }

    /// Leaf for a trainable parameter; memoized per tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_leaves.get(&id) {
            return node;
        }
        let node = self.push(store.value(id).clone(), Op::Param(id));
        self.param_leaves.insert(id, node);
        node
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).add(self.value(b));
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).sub(self.value(b));
        self.push(value, Op::Sub(a, b))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square(a))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let bv = self.value(bias);
        assert_eq!(bv.rows(), 1, "bias must be a row vector");
        assert_eq!(bv.cols(), self.value(a).cols(), "bias width mismatch");
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_mut(r).iter_mut().zip(self.nodes[bias.0].value.row(0)) {
                *x += b;
            }
        }
        self.push(value, Op::AddRowBias(a, bias))
    }

    pub fn neighbor_sum(&mut self, a: NodeId, adj: &Arc<Vec<Vec<usize>>>) -> NodeId {
        let av = self.value(a);
        assert_eq!(av.rows(), adj.len(), "adjacency size mismatch");
        let value = aggregate_neighbors(av, adj);
        self.push(value, Op::NeighborSum(a, Arc::clone(adj)))
    }

    pub fn col_sum(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).col_sum();
        self.push(value, Op::ColSum(a))
    }

    pub fn repeat_rows(&mut self, a: NodeId, n: usize) -> NodeId {
        let av = self.value(a);
        assert_eq!(av.rows(), 1, "repeat_rows expects a row vector");
        let row = av.row(0).to_vec();
        let value = DenseMatrix::from_fn(n, row.len(), |_, j| row[j]);
        self.push(value, Op::RepeatRows(a))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a).concat_cols(self.value(b));
        self.push(value, Op::ConcatCols(a, b))
    }

    pub fn mask_sum(&mut self, a: NodeId, mask: DenseMatrix) -> NodeId {
        let av = self.value(a);
        assert_eq!(av.shape(), mask.shape(), "mask shape mismatch");
        let mut acc = 0.0;
        for (x, m) in av.data().iter().zip(mask.data()) {
            acc += x * m;
        }
        let value = DenseMatrix::from_vec(1, 1, vec![acc]).expect("1x1");
        self.push(value, Op::MaskSum(a, mask))
    }

    /// Softmax cross-entropy of a `1 x C` logit row against `label`.
    pub fn cross_entropy(&mut self, logits: NodeId, label: usize) -> NodeId {
        let lv = self.value(logits);
        assert_eq!(lv.rows(), 1, "cross_entropy expects a logit row");
        assert!(label < lv.cols(), "label out of range");
        let row = lv.row(0);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logz = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
        let loss = logz - row[label];
        let value = DenseMatrix::from_vec(1, 1, vec![loss]).expect("1x1");
        self.push(value, Op::CrossEntropy(logits, label))
    }

    pub fn mse_mean(&mut self, pred: NodeId, target: DenseMatrix) -> NodeId {
        let pv = self.value(pred);
        assert_eq!(pv.shape(), target.shape(), "mse target shape mismatch");
        let n = pv.data().len() as f64;
        let loss = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let value = DenseMatrix::from_vec(1, 1, vec![loss]).expect("1x1");
        self.push(value, Op::MseMean(pred, target))
    }

    pub fn mae_mean(&mut self, pred: NodeId, target: DenseMatrix) -> NodeId {
        let pv = self.value(pred);
        assert_eq!(pv.shape(), target.shape(), "mae target shape mismatch");
        let n = pv.data().len() as f64;
        let loss = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t).abs())
            .sum::<f64>()
            / n;
        let value = DenseMatrix::from_vec(1, 1, vec![loss]).expect("1x1");
        self.push(value, Op::MaeMean(pred, target))
    }

    /// Mean of a list of scalar nodes.
    pub fn mean_scalars(&mut self, scalars: &[NodeId]) -> NodeId {
        assert!(!scalars.is_empty(), "mean of nothing");
        let mut acc = scalars[0];
        for &s in &scalars[1..] {
            acc = self.add(acc, s);
        }
        self.scale(acc, 1.0 / scalars.len() as f64)
    }

    /// Reverse pass from a scalar `target`; accumulates parameter gradients
    /// into `params`. Gradient buffers are reset first, so each backward call
    /// yields exactly the gradients of this tape's scalar.
    pub fn backward(&self, target: NodeId, params: &mut ParamStore) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward without a recorded forward pass".into()));
        }
        if target.0 >= self.nodes.len() {
            return Err(Error::State("backward target is not on this tape".into()));
        }
        if self.nodes[target.0].value.shape() != (1, 1) {
            return Err(Error::Shape("backward target must be a scalar".into()));
        }
        params.zero_grads();
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; target.0 + 1];
        grads[target.0] = Some(DenseMatrix::from_vec(1, 1, vec![1.0]).expect("1x1"));

        for idx in (0..=target.0).rev() {
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(pid) => params.accumulate_grad(*pid, &gout),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, gout.clone());
                    accumulate(&mut grads, *b, gout);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, gout.clone());
                    accumulate(&mut grads, *b, gout.scale(-1.0));
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, gout.scale(*s)),
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut g = gout;
                    for (gi, &xi) in g.data_mut().iter_mut().zip(av.data()) {
                        if xi <= 0.0 {
                            *gi = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::Square(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut g = gout;
                    for (gi, &xi) in g.data_mut().iter_mut().zip(av.data()) {
                        *gi *= 2.0 * xi;
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    accumulate(&mut grads, *a, gout.matmul_nt(bv));
                    accumulate(&mut grads, *b, av.matmul_tn(&gout));
                }
                Op::AddRowBias(a, bias) => {
                    accumulate(&mut grads, *bias, gout.col_sum());
                    accumulate(&mut grads, *a, gout);
                }
                Op::NeighborSum(a, adj) => {
                    // The aggregation matrix is symmetric for undirected
                    // graphs, so the backward pass is the same aggregation.
                    accumulate(&mut grads, *a, aggregate_neighbors(&gout, adj));
                }
                Op::ColSum(a) => {
                    let rows = self.nodes[a.0].value.rows();
                    let row = gout.row(0).to_vec();
                    let g = DenseMatrix::from_fn(rows, row.len(), |_, j| row[j]);
                    accumulate(&mut grads, *a, g);
                }
                Op::RepeatRows(a) => accumulate(&mut grads, *a, gout.col_sum()),
                Op::ConcatCols(a, b) => {
                    let ac = self.nodes[a.0].value.cols();
                    let bc = self.nodes[b.0].value.cols();
                    let rows = gout.rows();
                    let mut ga = DenseMatrix::zeros(rows, ac);
                    let mut gb = DenseMatrix::zeros(rows, bc);
                    for r in 0..rows {
                        ga.row_mut(r).copy_from_slice(&gout.row(r)[..ac]);
                        gb.row_mut(r).copy_from_slice(&gout.row(r)[ac..]);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MaskSum(a, mask) => {
                    accumulate(&mut grads, *a, mask.scale(gout.get(0, 0)));
                }
                Op::CrossEntropy(logits, label) => {
                    let lv = &self.nodes[logits.0].value;
                    let row = lv.row(0);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    let s = gout.get(0, 0);
                    let g = DenseMatrix::from_fn(1, row.len(), |_, j| {
                        let softmax = exps[j] / z;
                        let onehot = if j == *label { 1.0 } else { 0.0 };
                        s * (softmax - onehot)
                    });
                    accumulate(&mut grads, *logits, g);
                }
                Op::MseMean(pred, tgt) => {
                    let pv = &self.nodes[pred.0].value;
                    let n = pv.data().len() as f64;
                    let s = gout.get(0, 0);
                    let mut g = pv.sub(tgt);
                    for x in g.data_mut() {
                        *x *= 2.0 * s / n;
                    }
                    accumulate(&mut grads, *pred, g);
                }
                Op::MaeMean(pred, tgt) => {
                    let pv = &self.nodes[pred.0].value;
                    let n = pv.data().len() as f64;
                    let s = gout.get(0, 0);
                    let g = DenseMatrix::from_fn(pv.rows(), pv.cols(), |i, j| {
                        let d = pv.get(i, j) - tgt.get(i, j);
                        if d > 0.0 {
                            s / n
                        } else if d < 0.0 {
                            -s / n
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *pred, g);
                }
            }
        }
        Ok(())
    }
}

fn aggregate_neighbors(input: &DenseMatrix, adj: &[Vec<usize>]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(input.rows(), input.cols());
    for (v, nbs) in adj.iter().enumerate() {
        for &u in nbs {
            let src = input.row(u).to_vec();
            for (o, x) in out.row_mut(v).iter_mut().zip(src) {
                *o += x;
            }
        }
    }
    out
}

fn accumulate(grads: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_of_parameter_sum_is_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let id = store.register("w", 2, 3, Init::Glorot, &mut rng).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let mask = DenseMatrix::from_fn(2, 3, |_, _| 1.0);
        let loss = tape.mask_sum(w, mask);
        tape.backward(loss, &mut store).unwrap();
        assert!(store.grad(id).data().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn zero_scaled_loss_has_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let id = store.register("w", 2, 2, Init::Glorot, &mut rng).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.square(w);
        let total = tape.mask_sum(sq, DenseMatrix::from_fn(2, 2, |_, _| 1.0));
        let loss = tape.scale(total, 0.0);
        tape.backward(loss, &mut store).unwrap();
        assert!(store.grad(id).data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let mut store = ParamStore::new();
        let tape = Tape::new();
        assert!(matches!(
            tape.backward(NodeId(0), &mut store),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn backward_rejects_non_scalar_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let id = store.register("w", 2, 2, Init::Glorot, &mut rng).unwrap();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        assert!(matches!(
            tape.backward(w, &mut store),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn cross_entropy_matches_closed_forms() {
        let mut tape = Tape::new();
        let uniform = tape.constant(DenseMatrix::zeros(1, 10));
        let ce = tape.cross_entropy(uniform, 3);
        assert!((tape.scalar(ce) - (10.0f64).ln()).abs() < 1e-12);

        let two = tape.constant(DenseMatrix::zeros(1, 2));
        let ce2 = tape.cross_entropy(two, 0);
        assert!((tape.scalar(ce2) - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn mse_zero_when_prediction_equals_target() {
        let mut tape = Tape::new();
        let pred = tape.constant(DenseMatrix::from_vec(2, 1, vec![1.0, -2.0]).unwrap());
        let loss = tape.mse_mean(pred, DenseMatrix::from_vec(2, 1, vec![1.0, -2.0]).unwrap());
        assert_eq!(tape.scalar(loss), 0.0);
    }

    #[test]
    fn param_leaves_are_shared_within_a_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let id = store.register("w", 1, 1, Init::Glorot, &mut rng).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, id);
        let b = tape.param(&store, id);
        assert_eq!(a, b);
        // Using the leaf twice doubles its gradient.
        let s = tape.add(a, b);
        let loss = tape.mask_sum(s, DenseMatrix::from_fn(1, 1, |_, _| 1.0));
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).get(0, 0), 2.0);
    }
}
