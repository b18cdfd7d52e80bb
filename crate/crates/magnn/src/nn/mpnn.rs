//! GIN-style message passing, pooling, MLP heads, and task losses.
//!
//! Each layer computes `h_v = MLP((1 + eps) * h_v + sum of neighbor h_u)`,
//! where the MLP is Linear -> ReLU -> Linear. Sum aggregation keeps the
//! layer at full 1-WL power. With jumping-knowledge `sum`, the encoder
//! output is the sum of all per-layer embeddings instead of the last one.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, MarkedGraph};
use crate::nn::matrix::DenseMatrix;
use crate::nn::params::{Init, ParamId, ParamStore};
use crate::nn::tape::{NodeId, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpingKnowledge {
    None,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Graph,
    Node,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpnnSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    /// Self-loop weight of the combine step; fixed (not trained).
    pub epsilon: f64,
    pub jumping_knowledge: JumpingKnowledge,
}

impl MpnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::InvalidParameter("mpnn needs at least 1 layer".into()));
        }
        if self.input_dim < 1 || self.hidden_dim < 1 {
            return Err(Error::InvalidParameter("mpnn dims must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct GinLayer {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

/// Parameter handles of one message-passing encoder inside a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct MpnnParams {
    layers: Vec<GinLayer>,
}

impl MpnnParams {
    pub fn register(
        spec: &MpnnSpec,
        prefix: &str,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.layers);
        for l in 0..spec.layers {
            let in_dim = if l == 0 { spec.input_dim } else { spec.hidden_dim };
            layers.push(GinLayer {
                w1: store.register(
                    &format!("{prefix}.layer{l}.w1"),
                    in_dim,
                    spec.hidden_dim,
                    Init::Glorot,
                    rng,
                )?,
                b1: store.register(
                    &format!("{prefix}.layer{l}.b1"),
                    1,
                    spec.hidden_dim,
                    Init::Uniform(1.0 / (in_dim as f64).sqrt()),
                    rng,
                )?,
                w2: store.register(
                    &format!("{prefix}.layer{l}.w2"),
                    spec.hidden_dim,
                    spec.hidden_dim,
                    Init::Glorot,
                    rng,
                )?,
                b2: store.register(
                    &format!("{prefix}.layer{l}.b2"),
                    1,
                    spec.hidden_dim,
                    Init::Uniform(1.0 / (spec.hidden_dim as f64).sqrt()),
                    rng,
                )?,
            });
        }
        Ok(MpnnParams { layers })
    }

    /// Recorded embedding builder. `input` must be `n x input_dim`.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        spec: &MpnnSpec,
        store: &ParamStore,
        input: NodeId,
        adj: &Arc<Vec<Vec<usize>>>,
    ) -> NodeId {
        let mut h = input;
        let mut jk_acc: Option<NodeId> = None;
        for layer in &self.layers {
            let nb = tape.neighbor_sum(h, adj);
            let selfed = tape.scale(h, 1.0 + spec.epsilon);
            let combined = tape.add(selfed, nb);
            let w1 = tape.param(store, layer.w1);
            let b1 = tape.param(store, layer.b1);
            let w2 = tape.param(store, layer.w2);
            let b2 = tape.param(store, layer.b2);
            let z = tape.matmul(combined, w1);
            let z = tape.add_row_bias(z, b1);
            let z = tape.relu(z);
            let z = tape.matmul(z, w2);
            h = tape.add_row_bias(z, b2);
            if spec.jumping_knowledge == JumpingKnowledge::Sum {
                jk_acc = Some(match jk_acc {
                    None => h,
                    Some(acc) => tape.add(acc, h),
                });
            }
        }
        match spec.jumping_knowledge {
            JumpingKnowledge::None => h,
            JumpingKnowledge::Sum => jk_acc.expect("at least one layer"),
        }
    }
}

/// Anything an encoder can consume: node features plus adjacency.
pub trait EncoderInput {
    fn encoder_features(&self) -> DenseMatrix;
    fn encoder_adjacency(&self) -> &Arc<Vec<Vec<usize>>>;
}

impl EncoderInput for Graph {
    fn encoder_features(&self) -> DenseMatrix {
        self.plain_input()
    }

    fn encoder_adjacency(&self) -> &Arc<Vec<Vec<usize>>> {
        self.adjacency()
    }
}

impl EncoderInput for MarkedGraph<'_> {
    fn encoder_features(&self) -> DenseMatrix {
        self.input_features()
    }

    fn encoder_adjacency(&self) -> &Arc<Vec<Vec<usize>>> {
        self.base().adjacency()
    }
}

/// Node embeddings `H = g(G)` of a plain or marked graph.
pub fn mpnn_forward<I: EncoderInput>(
    spec: &MpnnSpec,
    params: &MpnnParams,
    store: &ParamStore,
    input: &I,
) -> Result<DenseMatrix> {
    let features = input.encoder_features();
    if features.cols() != spec.input_dim {
        return Err(Error::Shape(format!(
            "encoder expects input dim {}, graph provides {}",
            spec.input_dim,
            features.cols()
        )));
    }
    let mut tape = Tape::new();
    let x = tape.constant(features);
    let h = params.forward_on_tape(&mut tape, spec, store, x, input.encoder_adjacency());
    Ok(tape.value(h).clone())
}

/// Graph mode sums the embedding rows into a single vector; node mode is the
/// identity.
pub fn pool(mode: PoolMode, embeddings: &DenseMatrix) -> DenseMatrix {
    match mode {
        PoolMode::Graph => embeddings.col_sum(),
        PoolMode::Node => embeddings.clone(),
    }
}

pub fn pool_on_tape(tape: &mut Tape, mode: PoolMode, embeddings: NodeId) -> NodeId {
    match mode {
        PoolMode::Graph => tape.col_sum(embeddings),
        PoolMode::Node => embeddings,
    }
}

/// Two-layer MLP head (Linear -> ReLU -> Linear).
#[derive(Clone, Debug)]
pub struct MlpParams {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl MlpParams {
    pub fn register(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        prefix: &str,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if in_dim < 1 || hidden_dim < 1 || out_dim < 1 {
            return Err(Error::InvalidParameter("mlp dims must be >= 1".into()));
        }
        Ok(MlpParams {
            w1: store.register(&format!("{prefix}.w1"), in_dim, hidden_dim, Init::Glorot, rng)?,
            b1: store.register(
                &format!("{prefix}.b1"),
                1,
                hidden_dim,
                Init::Uniform(1.0 / (in_dim as f64).sqrt()),
                rng,
            )?,
            w2: store.register(&format!("{prefix}.w2"), hidden_dim, out_dim, Init::Glorot, rng)?,
            b2: store.register(
                &format!("{prefix}.b2"),
                1,
                out_dim,
                Init::Uniform(1.0 / (hidden_dim as f64).sqrt()),
                rng,
            )?,
        })
    }

    /// Applies the head row-wise to `input` (`n x in_dim` -> `n x out_dim`).
    pub fn forward_on_tape(&self, tape: &mut Tape, store: &ParamStore, input: NodeId) -> NodeId {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let z = tape.matmul(input, w1);
        let z = tape.add_row_bias(z, b1);
        let z = tape.relu(z);
        let z = tape.matmul(z, w2);
        tape.add_row_bias(z, b2)
    }

    /// Zeroes the output layer; useful for Q-heads that should start neutral.
    pub fn zero_output_layer(&self, store: &mut ParamStore) {
        store.value_mut(self.w2).fill(0.0);
        store.value_mut(self.b2).fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
    Mae,
}

/// Loss target: a class id for classification, or a value matrix matching the
/// prediction shape for regression.
#[derive(Clone, Debug)]
pub enum LossTarget {
    Class(usize),
    Values(DenseMatrix),
}

pub fn loss_on_tape(
    tape: &mut Tape,
    kind: LossKind,
    prediction: NodeId,
    target: &LossTarget,
) -> Result<NodeId> {
    let shape = tape.value(prediction).shape();
    match (kind, target) {
        (LossKind::CrossEntropy, LossTarget::Class(label)) => {
            if shape.0 != 1 {
                return Err(Error::Shape(format!(
                    "cross-entropy expects a single logit row, got {}x{}",
                    shape.0, shape.1
                )));
            }
            if *label >= shape.1 {
                return Err(Error::Shape(format!(
                    "label {label} out of range for {} classes",
                    shape.1
                )));
            }
            Ok(tape.cross_entropy(prediction, *label))
        }
        (LossKind::Mse, LossTarget::Values(t)) => {
            if t.shape() != shape {
                return Err(Error::Shape(format!(
                    "mse target {}x{} vs prediction {}x{}",
                    t.rows(),
                    t.cols(),
                    shape.0,
                    shape.1
                )));
            }
            Ok(tape.mse_mean(prediction, t.clone()))
        }
        (LossKind::Mae, LossTarget::Values(t)) => {
            if t.shape() != shape {
                return Err(Error::Shape(format!(
                    "mae target {}x{} vs prediction {}x{}",
                    t.rows(),
                    t.cols(),
                    shape.0,
                    shape.1
                )));
            }
            Ok(tape.mae_mean(prediction, t.clone()))
        }
        (LossKind::CrossEntropy, _) => Err(Error::InvalidArgument(
            "cross-entropy needs a class target".into(),
        )),
        (_, LossTarget::Class(_)) => Err(Error::InvalidArgument(
            "regression losses need a value target".into(),
        )),
    }
}

/// Scalar loss of a fixed prediction against a target.
pub fn loss(kind: LossKind, prediction: &DenseMatrix, target: &LossTarget) -> Result<f64> {
    let mut tape = Tape::new();
    let pred = tape.constant(prediction.clone());
    let node = loss_on_tape(&mut tape, kind, pred, target)?;
    Ok(tape.scalar(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::generate_cycle_union;
    use crate::graph::NodeTuple;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_spec(input_dim: usize) -> MpnnSpec {
        MpnnSpec {
            input_dim,
            hidden_dim: 6,
            layers: 2,
            epsilon: 0.0,
            jumping_knowledge: JumpingKnowledge::None,
        }
    }

    #[test]
    fn isolated_node_sees_only_itself() {
        // One isolated node, 1 layer: output is MLP((1+eps) * h0).
        let g = Graph::new(1, []).unwrap();
        let spec = MpnnSpec {
            input_dim: 1,
            hidden_dim: 4,
            layers: 1,
            epsilon: 0.25,
            jumping_knowledge: JumpingKnowledge::None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let params = MpnnParams::register(&spec, "enc", &mut store, &mut rng).unwrap();
        let out = mpnn_forward(&spec, &params, &store, &g).unwrap();

        // Reference computation by hand.
        let w1 = store.value(store.id("enc.layer0.w1").unwrap());
        let b1 = store.value(store.id("enc.layer0.b1").unwrap());
        let w2 = store.value(store.id("enc.layer0.w2").unwrap());
        let b2 = store.value(store.id("enc.layer0.b2").unwrap());
        let x = DenseMatrix::from_vec(1, 1, vec![1.25]).unwrap();
        let expect = x.matmul(w1).add(b1).map(|v| v.max(0.0)).matmul(w2).add(b2);
        for j in 0..4 {
            assert!((out.get(0, j) - expect.get(0, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn embeddings_are_equivariant_and_pooling_invariant() {
        let g = generate_cycle_union(&[3, 6]).unwrap();
        let t = NodeTuple::new(vec![4, 0]).unwrap();
        let spec = small_spec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let params = MpnnParams::register(&spec, "enc", &mut store, &mut rng).unwrap();

        for trial in 0..5 {
            let perm =
                crate::generators::random_permutation(9, &mut ChaCha8Rng::seed_from_u64(trial));
            let pg = g.permute(&perm).unwrap();
            let pt = t.permute(&perm);
            let h = mpnn_forward(&spec, &params, &store, &MarkedGraph::new(&g, &t).unwrap())
                .unwrap();
            let ph = mpnn_forward(&spec, &params, &store, &MarkedGraph::new(&pg, &pt).unwrap())
                .unwrap();
            for v in 0..9 {
                for j in 0..6 {
                    assert!((h.get(v, j) - ph.get(perm[v], j)).abs() < 1e-9);
                }
            }
            let pooled = pool(PoolMode::Graph, &h);
            let ppooled = pool(PoolMode::Graph, &ph);
            for j in 0..6 {
                assert!((pooled.get(0, j) - ppooled.get(0, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unmarked_regular_unions_pool_identically() {
        // (3,3,3) vs (3,6): 1-WL-equivalent, so pooled embeddings agree for
        // any parameters.
        let a = generate_cycle_union(&[3, 6]).unwrap();
        let b = generate_cycle_union(&[3, 3, 3]).unwrap();
        let spec = small_spec(1);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            let params = MpnnParams::register(&spec, "enc", &mut store, &mut rng).unwrap();
            let ha = pool(PoolMode::Graph, &mpnn_forward(&spec, &params, &store, &a).unwrap());
            let hb = pool(PoolMode::Graph, &mpnn_forward(&spec, &params, &store, &b).unwrap());
            for j in 0..6 {
                assert!((ha.get(0, j) - hb.get(0, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let g = generate_cycle_union(&[3]).unwrap();
        let spec = small_spec(3); // graph provides a ones column (dim 1)
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let params = MpnnParams::register(&spec, "enc", &mut store, &mut rng).unwrap();
        assert!(matches!(
            mpnn_forward(&spec, &params, &store, &g),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn pool_cases() {
        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(pool(PoolMode::Graph, &z).data(), &[0.0, 0.0]);
        let single = DenseMatrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pool(PoolMode::Graph, &single), single);
        assert_eq!(pool(PoolMode::Node, &single), single);
    }

    #[test]
    fn loss_closed_forms_and_errors() {
        let uniform = DenseMatrix::zeros(1, 10);
        let ce = loss(LossKind::CrossEntropy, &uniform, &LossTarget::Class(0)).unwrap();
        assert!((ce - (10.0f64).ln()).abs() < 1e-12);

        let p = DenseMatrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap();
        assert_eq!(
            loss(LossKind::Mse, &p, &LossTarget::Values(p.clone())).unwrap(),
            0.0
        );
        assert!(loss(LossKind::Mse, &p, &LossTarget::Class(0)).is_err());
        let bad = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            loss(LossKind::Mse, &p, &LossTarget::Values(bad)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            loss(LossKind::CrossEntropy, &p, &LossTarget::Class(5)),
            Err(Error::Shape(_))
        ));
    }
}
