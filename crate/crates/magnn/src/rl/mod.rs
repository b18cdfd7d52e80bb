//! Deep-Q machinery: agent state over marked node tuples, the reduced joint
//! action space, rewards as environment-loss improvements, and the replay
//! buffer.
//!
//! The action space is the reduced one: there is no tuple-selection
//! dimension; every step all m tuples simultaneously replace one of their k
//! positions with some node, each choice computed from the same current
//! state.

pub mod qnet;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeTuple};
use crate::model::PredictionModel;
use crate::nn::DenseMatrix;

pub use qnet::{QNetConfig, QNetworkModel};

/// RL state: one graph, m node tuples, and the m x w state-tracker matrix.
/// The tracker is zero-initialized and kept by an identity update; its
/// pooled value feeds the Q-head so alternative trackers stay pluggable.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub graph: Arc<Graph>,
    pub tuples: Vec<NodeTuple>,
    pub tracker: DenseMatrix,
}

impl AgentState {
    /// Fresh state with uniformly sampled tuples and a zero tracker.
    pub fn random_init(
        graph: Arc<Graph>,
        num_tuples: usize,
        order: usize,
        tracker_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let tuples = (0..num_tuples)
            .map(|_| NodeTuple::sample_uniform(&graph, order, rng))
            .collect();
        AgentState {
            tracker: DenseMatrix::zeros(num_tuples, tracker_width),
            graph,
            tuples,
        }
    }

    pub fn num_tuples(&self) -> usize {
        self.tuples.len()
    }

    pub fn order(&self) -> usize {
        self.tuples.first().map(|t| t.order()).unwrap_or(0)
    }
}

/// One tuple's move: replace the node at `position` with `node`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TupleMove {
    pub position: usize,
    pub node: usize,
}

/// Simultaneous per-tuple choices, all computed from the same state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointAction {
    pub moves: Vec<TupleMove>,
}

/// Applies all per-tuple replacements simultaneously. The graph is unchanged
/// and the tracker is carried over by the identity update.
pub fn apply_action(state: &AgentState, action: &JointAction) -> Result<AgentState> {
    if action.moves.len() != state.tuples.len() {
        return Err(Error::InvalidAction(format!(
            "action has {} moves for {} tuples",
            action.moves.len(),
            state.tuples.len()
        )));
    }
    let n = state.graph.num_nodes();
    let mut tuples = Vec::with_capacity(state.tuples.len());
    for (tuple, mv) in state.tuples.iter().zip(&action.moves) {
        if mv.node >= n {
            return Err(Error::InvalidAction(format!(
                "move target node {} out of range for {n} nodes",
                mv.node
            )));
        }
        if mv.position >= tuple.order() {
            return Err(Error::InvalidAction(format!(
                "move position {} out of range for order {}",
                mv.position,
                tuple.order()
            )));
        }
        tuples.push(tuple.replace(mv.position, mv.node)?);
    }
    Ok(AgentState {
        graph: Arc::clone(&state.graph),
        tuples,
        tracker: state.tracker.clone(),
    })
}

/// Instant reward of moving the tuple set from `old` to `new`: the
/// environment-loss improvement `L(old) - L(new)`. Node tasks use the mean
/// per-node loss. The environment is evaluated without recording gradients.
pub fn reward(
    env: &PredictionModel,
    graph: &Graph,
    old: &[NodeTuple],
    new: &[NodeTuple],
    target: &Target,
) -> Result<f64> {
    let before = env.eval_loss(graph, old, target)?;
    let after = env.eval_loss(graph, new, target)?;
    Ok(before - after)
}

/// One transition, stored for replay. `next_state` is structurally
/// `apply_action(state, action)`.
#[derive(Clone, Debug)]
pub struct Experience {
    pub state: AgentState,
    pub action: JointAction,
    pub reward: f64,
    pub next_state: AgentState,
}

/// Bounded FIFO of experiences with a uniform sampler.
#[derive(Debug)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay buffer capacity must be >= 1");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Vec<&Experience> {
        assert!(!self.items.is_empty(), "sampling an empty buffer");
        (0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

/// Linear exploration schedule: `start` at step 0, `end` from `decay_steps`
/// onward. Non-increasing for `start >= end` and reaches `end` exactly at the
/// decay horizon.
#[derive(Clone, Copy, Debug)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TaskKind;
    use crate::model::EncoderConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ten_node_graph() -> Arc<Graph> {
        Arc::new(crate::generators::generate_csl(10, 2).unwrap())
    }

    #[test]
    fn apply_action_replaces_positions_simultaneously() {
        let g = ten_node_graph();
        let state = AgentState {
            graph: g,
            tuples: vec![
                NodeTuple::new(vec![1, 2]).unwrap(),
                NodeTuple::new(vec![3, 4]).unwrap(),
            ],
            tracker: DenseMatrix::zeros(2, 1),
        };
        let action = JointAction {
            moves: vec![
                TupleMove { position: 0, node: 7 },
                TupleMove { position: 1, node: 9 },
            ],
        };
        let next = apply_action(&state, &action).unwrap();
        assert_eq!(next.tuples[0].nodes(), &[7, 2]);
        assert_eq!(next.tuples[1].nodes(), &[3, 9]);
        // Graph unchanged, tracker still zero.
        assert!(Arc::ptr_eq(&state.graph, &next.graph));
        assert!(next.tracker.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stationary_move_keeps_tuples() {
        let g = ten_node_graph();
        let state = AgentState {
            graph: g,
            tuples: vec![NodeTuple::new(vec![5, 6]).unwrap()],
            tracker: DenseMatrix::zeros(1, 1),
        };
        let action = JointAction {
            moves: vec![TupleMove { position: 1, node: 6 }],
        };
        let next = apply_action(&state, &action).unwrap();
        assert_eq!(next.tuples, state.tuples);
    }

    #[test]
    fn invalid_moves_are_rejected() {
        let g = ten_node_graph();
        let state = AgentState {
            graph: g,
            tuples: vec![NodeTuple::new(vec![0, 1]).unwrap()],
            tracker: DenseMatrix::zeros(1, 1),
        };
        let bad_node = JointAction {
            moves: vec![TupleMove { position: 0, node: 10 }],
        };
        assert!(matches!(
            apply_action(&state, &bad_node),
            Err(Error::InvalidAction(_))
        ));
        let bad_pos = JointAction {
            moves: vec![TupleMove { position: 2, node: 0 }],
        };
        assert!(apply_action(&state, &bad_pos).is_err());
        let bad_arity = JointAction { moves: vec![] };
        assert!(apply_action(&state, &bad_arity).is_err());
    }

    #[test]
    fn reward_is_zero_for_no_op_and_antisymmetric() {
        let g = ten_node_graph();
        let env = PredictionModel::new(
            TaskKind::GraphClass { num_classes: 2 },
            2,
            0,
            &EncoderConfig {
                layers: 2,
                hidden_dim: 6,
                epsilon: 0.0,
                jumping_knowledge: crate::nn::JumpingKnowledge::None,
                head_hidden: 6,
            },
            3,
        )
        .unwrap();
        let a = vec![NodeTuple::new(vec![0, 5]).unwrap()];
        let b = vec![NodeTuple::new(vec![2, 8]).unwrap()];
        let y = Target::Class(1);
        assert_eq!(reward(&env, &g, &a, &a, &y).unwrap(), 0.0);
        let ab = reward(&env, &g, &a, &b, &y).unwrap();
        let ba = reward(&env, &g, &b, &a, &y).unwrap();
        assert!((ab + ba).abs() < 1e-12);
    }

    #[test]
    fn buffer_keeps_the_last_capacity_items_in_order() {
        let g = ten_node_graph();
        let mk = |i: usize| Experience {
            state: AgentState {
                graph: Arc::clone(&g),
                tuples: vec![NodeTuple::new(vec![i % 10]).unwrap()],
                tracker: DenseMatrix::zeros(1, 1),
            },
            action: JointAction {
                moves: vec![TupleMove { position: 0, node: i % 10 }],
            },
            reward: i as f64,
            next_state: AgentState {
                graph: Arc::clone(&g),
                tuples: vec![NodeTuple::new(vec![i % 10]).unwrap()],
                tracker: DenseMatrix::zeros(1, 1),
            },
        };
        let capacity = 5;
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..capacity + 3 {
            buf.push(mk(i));
        }
        assert_eq!(buf.len(), capacity);
        let rewards: Vec<f64> = buf.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0, 7.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = buf.sample(3, &mut rng);
        assert_eq!(sample.len(), 3);
    }

    #[test]
    fn epsilon_schedule_is_linear_and_exact() {
        let sched = EpsilonSchedule {
            start: 1.0,
            end: 0.0,
            decay_steps: 10,
        };
        let mut prev = f64::INFINITY;
        for step in 0..20 {
            let e = sched.value(step);
            assert!(e <= prev);
            prev = e;
        }
        assert_eq!(sched.value(0), 1.0);
        assert_eq!(sched.value(5), 0.5);
        assert_eq!(sched.value(10), 0.0);
        assert_eq!(sched.value(15), 0.0);
    }
}
