//! Minimal differentiable computation kernel: dense matrices, a reverse-mode
//! tape, GIN message passing, pooling, losses, and Adam.

pub mod fdcheck;
pub mod matrix;
pub mod mpnn;
pub mod params;
pub mod tape;

pub use matrix::DenseMatrix;
pub use mpnn::{
    loss, loss_on_tape, mpnn_forward, pool, pool_on_tape, EncoderInput, JumpingKnowledge,
    LossKind, LossTarget, MlpParams, MpnnParams, MpnnSpec, PoolMode,
};
pub use params::{Init, ParamId, ParamStore};
pub use tape::{NodeId, Tape};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::erdos_renyi;
    use crate::graph::{MarkedGraph, NodeTuple};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Tape gradients for an end-to-end marked-graph encoder + head agree
    /// with the finite-difference oracle (h = 1e-5, rel err <= 1e-4).
    #[test]
    fn tape_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = erdos_renyi(6, 0.4, &mut rng);
        let t = NodeTuple::new(vec![2, 5]).unwrap();
        let spec = MpnnSpec {
            input_dim: 2,
            hidden_dim: 4,
            layers: 2,
            epsilon: 0.1,
            jumping_knowledge: JumpingKnowledge::Sum,
        };
        let mut store = ParamStore::new();
        let enc = MpnnParams::register(&spec, "enc", &mut store, &mut rng).unwrap();
        let head = MlpParams::register(4, 5, 3, "head", &mut store, &mut rng).unwrap();

        let eval = |store: &ParamStore, enc: &MpnnParams, head: &MlpParams| {
            let marked = MarkedGraph::new(&g, &t).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(marked.input_features());
            let h = enc.forward_on_tape(&mut tape, &spec, store, x, g.adjacency());
            let pooled = pool_on_tape(&mut tape, PoolMode::Graph, h);
            let logits = head.forward_on_tape(&mut tape, store, pooled);
            let loss = loss_on_tape(&mut tape, LossKind::CrossEntropy, logits, &LossTarget::Class(1))
                .unwrap();
            (tape, loss)
        };

        let (tape, loss) = eval(&store, &enc, &head);
        tape.backward(loss, &mut store).unwrap();
        let err = fdcheck::max_fd_error(&mut store, 1e-5, |s| {
            let (tape, loss) = eval(s, &enc, &head);
            tape.scalar(loss)
        });
        assert!(err <= 1e-4, "max relative error {err}");
    }
}
