//! Equivariant Q-network over marked graphs, with target-network bookkeeping,
//! epsilon-greedy action selection, TD optimization, and rollouts.
//!
//! Row l of a tuple's Q-table is the head applied to node l's embedding in
//! that tuple's marked copy, concatenated with the summed graph pooling over
//! all marked copies and the pooled state tracker; column j estimates the
//! return of replacing tuple position j with node l.

use std::cell::Cell;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::graph::{marked_input_dim, Graph, MarkedGraph};
use crate::model::PredictionModel;
use crate::nn::{
    DenseMatrix, JumpingKnowledge, MlpParams, MpnnParams, MpnnSpec, NodeId, ParamStore, Tape,
};
use crate::rl::{apply_action, reward, AgentState, Experience, JointAction, TupleMove};
use crate::util::subseed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNetConfig {
    /// Tuple order k; fixes the Q-table column count.
    pub order: usize,
    /// Width of the state tracker W.
    pub tracker_width: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub epsilon: f64,
    pub head_hidden: usize,
}

impl Default for QNetConfig {
    fn default() -> Self {
        QNetConfig {
            order: 2,
            tracker_width: 1,
            layers: 4,
            hidden_dim: 64,
            epsilon: 0.0,
            head_hidden: 64,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QNetManifest {
    cfg: QNetConfig,
    base_feature_dim: usize,
}

/// Online + target Q-network pair sharing one architecture.
#[derive(Debug)]
pub struct QNetworkModel {
    cfg: QNetConfig,
    base_feature_dim: usize,
    spec: MpnnSpec,
    online: ParamStore,
    target: ParamStore,
    encoder: MpnnParams,
    head: MlpParams,
    steps_since_sync: u64,
    mpnn_calls: Cell<u64>,
}

impl QNetworkModel {
    pub fn new(cfg: &QNetConfig, base_feature_dim: usize, seed: u64) -> Result<Self> {
        if cfg.order < 1 {
            return Err(Error::InvalidParameter("q-network needs order >= 1".into()));
        }
        let spec = MpnnSpec {
            input_dim: marked_input_dim(base_feature_dim, cfg.order),
            hidden_dim: cfg.hidden_dim,
            layers: cfg.layers,
            epsilon: cfg.epsilon,
            jumping_knowledge: JumpingKnowledge::None,
        };
        let mut online = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "q-network"));
        let encoder = MpnnParams::register(&spec, "qenc", &mut online, &mut rng)?;
        let head = MlpParams::register(
            2 * cfg.hidden_dim + cfg.tracker_width,
            cfg.head_hidden,
            cfg.order,
            "qhead",
            &mut online,
            &mut rng,
        )?;
        // The target starts as an exact copy of the initialization.
        let target = online.clone();
        Ok(QNetworkModel {
            cfg: cfg.clone(),
            base_feature_dim,
            spec,
            online,
            target,
            encoder,
            head,
            steps_since_sync: 0,
            mpnn_calls: Cell::new(0),
        })
    }

    pub fn config(&self) -> &QNetConfig {
        &self.cfg
    }

    pub fn order(&self) -> usize {
        self.cfg.order
    }

    pub fn online_store(&self) -> &ParamStore {
        &self.online
    }

    pub fn online_store_mut(&mut self) -> &mut ParamStore {
        &mut self.online
    }

    pub fn target_store(&self) -> &ParamStore {
        &self.target
    }

    pub fn checksum(&self) -> u64 {
        self.online.checksum()
    }

    pub fn target_checksum(&self) -> u64 {
        self.target.checksum()
    }

    pub fn steps_since_sync(&self) -> u64 {
        self.steps_since_sync
    }

    pub fn mpnn_calls(&self) -> u64 {
        self.mpnn_calls.get()
    }

    pub fn reset_mpnn_calls(&self) {
        self.mpnn_calls.set(0);
    }

    /// Zeroes the online head's output layer (all-zero Q-tables).
    pub fn zero_head_output_layer(&mut self) {
        self.head.zero_output_layer(&mut self.online);
    }

    fn validate_state(&self, state: &AgentState) -> Result<()> {
        if state.tuples.is_empty() {
            return Err(Error::InvalidArgument("state has no tuples".into()));
        }
        for t in &state.tuples {
            if t.order() != self.cfg.order {
                return Err(Error::InvalidTuple(format!(
                    "q-network consumes order-{} tuples, got {}",
                    self.cfg.order,
                    t.order()
                )));
            }
            t.validate_for(&state.graph)?;
        }
        if state.graph.raw_feature_dim() != self.base_feature_dim {
            return Err(Error::Shape(format!(
                "q-network expects {} base feature columns, graph has {}",
                self.base_feature_dim,
                state.graph.raw_feature_dim()
            )));
        }
        if state.tracker.shape() != (state.tuples.len(), self.cfg.tracker_width) {
            return Err(Error::Shape(format!(
                "tracker is {}x{}, expected {}x{}",
                state.tracker.rows(),
                state.tracker.cols(),
                state.tuples.len(),
                self.cfg.tracker_width
            )));
        }
        Ok(())
    }

    /// Builds all m Q-tables of a state on `tape`. Counts m MPNN invocations.
    fn q_tables_on_tape(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        state: &AgentState,
    ) -> Result<Vec<NodeId>> {
        self.validate_state(state)?;
        let graph: &Graph = &state.graph;
        let n = graph.num_nodes();

        let mut embeddings = Vec::with_capacity(state.tuples.len());
        for tuple in &state.tuples {
            let marked = MarkedGraph::new(graph, tuple)?;
            let x = tape.constant(marked.input_features());
            self.mpnn_calls.set(self.mpnn_calls.get() + 1);
            embeddings.push(
                self.encoder
                    .forward_on_tape(tape, &self.spec, store, x, graph.adjacency()),
            );
        }

        // Cross-tuple graph summary: sum of graph poolings.
        let mut summary: Option<NodeId> = None;
        for &e in &embeddings {
            let pooled = tape.col_sum(e);
            summary = Some(match summary {
                None => pooled,
                Some(acc) => tape.add(acc, pooled),
            });
        }
        let summary = summary.expect("at least one tuple");

        // Pooled tracker: mean over the tuple rows (constant under the
        // default zero tracker, but the interface stays).
        let tracker_pool = state.tracker.col_sum().scale(1.0 / state.tuples.len() as f64);
        let tracker_node = tape.constant(tracker_pool);

        let mut tables = Vec::with_capacity(embeddings.len());
        let rep_summary = tape.repeat_rows(summary, n);
        let rep_tracker = tape.repeat_rows(tracker_node, n);
        for &e in &embeddings {
            let with_summary = tape.concat_cols(e, rep_summary);
            let input = tape.concat_cols(with_summary, rep_tracker);
            tables.push(self.head.forward_on_tape(tape, store, input));
        }
        Ok(tables)
    }

    /// All m Q-tables as plain matrices (online network).
    pub fn q_tables(&self, state: &AgentState) -> Result<Vec<DenseMatrix>> {
        self.q_tables_with_store(&self.online, state)
    }

    pub fn q_tables_with_store(
        &self,
        store: &ParamStore,
        state: &AgentState,
    ) -> Result<Vec<DenseMatrix>> {
        let mut tape = Tape::new();
        let nodes = self.q_tables_on_tape(store, &mut tape, state)?;
        Ok(nodes.into_iter().map(|id| tape.value(id).clone()).collect())
    }

    /// Q-table of one tuple: `num_nodes x order`, entry (l, j) estimating the
    /// return of replacing tuple position j with node l.
    pub fn q_table(&self, state: &AgentState, tuple_index: usize) -> Result<DenseMatrix> {
        if tuple_index >= state.tuples.len() {
            return Err(Error::InvalidArgument(format!(
                "tuple index {tuple_index} out of range for {} tuples",
                state.tuples.len()
            )));
        }
        Ok(self.q_tables(state)?.swap_remove(tuple_index))
    }

    /// Epsilon-greedy joint action: per tuple, explore uniformly with
    /// probability epsilon, otherwise take the Q-table argmax with ties
    /// broken toward the lexicographically smallest (node, position).
    pub fn select_action(
        &self,
        state: &AgentState,
        epsilon: f64,
        rng: &mut impl Rng,
    ) -> Result<JointAction> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be in [0,1], got {epsilon}"
            )));
        }
        let tables = self.q_tables(state)?;
        let n = state.graph.num_nodes();
        let moves = tables
            .iter()
            .map(|table| {
                if rng.gen::<f64>() < epsilon {
                    TupleMove {
                        position: rng.gen_range(0..self.cfg.order),
                        node: rng.gen_range(0..n),
                    }
                } else {
                    argmax_move(table)
                }
            })
            .collect();
        Ok(JointAction { moves })
    }

    /// TD step on a replay batch: squared errors between online Q(s,a) and
    /// `r + gamma * max target-Q(s')`, averaged over experiences and tuples,
    /// followed by one Adam update of the online parameters. There are no
    /// terminal states; the bootstrap term is always present.
    pub fn td_optimize(
        &mut self,
        batch: &[&Experience],
        gamma: f64,
        learning_rate: f64,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("td batch must be nonempty".into()));
        }
        let mut tape = Tape::new();
        let mut errors = Vec::new();
        for exp in batch {
            let tables = self.q_tables_on_tape(&self.online, &mut tape, &exp.state)?;
            let next_tables = self.q_tables_with_store(&self.target, &exp.next_state)?;
            for (i, (&table, next)) in tables.iter().zip(&next_tables).enumerate() {
                let mv = exp.action.moves[i];
                let shape = tape.value(table).shape();
                if mv.node >= shape.0 || mv.position >= shape.1 {
                    return Err(Error::InvalidAction(format!(
                        "stored move ({}, {}) outside table {}x{}",
                        mv.node, mv.position, shape.0, shape.1
                    )));
                }
                let mut mask = DenseMatrix::zeros(shape.0, shape.1);
                mask.set(mv.node, mv.position, 1.0);
                let q_sa = tape.mask_sum(table, mask);
                let boot = next
                    .data()
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let y = exp.reward + gamma * boot;
                let y_node = tape.constant(DenseMatrix::from_vec(1, 1, vec![y])?);
                let diff = tape.sub(q_sa, y_node);
                errors.push(tape.square(diff));
            }
        }
        let loss = tape.mean_scalars(&errors);
        let loss_value = tape.scalar(loss);
        tape.backward(loss, &mut self.online)?;
        self.online.adam_step(
            learning_rate,
            crate::nn::params::ADAM_BETA1,
            crate::nn::params::ADAM_BETA2,
            crate::nn::params::ADAM_EPS,
        );
        self.steps_since_sync += 1;
        Ok(loss_value)
    }

    /// Copies online parameters into the target network and resets the sync
    /// counter.
    pub fn sync_target(&mut self) -> Result<()> {
        self.target.copy_values_from(&self.online)?;
        self.steps_since_sync = 0;
        Ok(())
    }

    /// Runs `steps` epsilon-greedy transitions with rewards from the frozen
    /// environment, returning the final state and the stored trajectory.
    /// Per step this costs m Q-table encoder calls plus 2m environment
    /// encoder calls (the old-set loss is recomputed, not cached).
    pub fn rollout(
        &self,
        env: &PredictionModel,
        target: &Target,
        initial: AgentState,
        steps: usize,
        epsilon: f64,
        rng: &mut impl Rng,
    ) -> Result<(AgentState, Vec<Experience>)> {
        let mut state = initial;
        let mut trajectory = Vec::with_capacity(steps);
        for _ in 0..steps {
            let action = self.select_action(&state, epsilon, rng)?;
            let next = apply_action(&state, &action)?;
            let r = reward(env, &state.graph, &state.tuples, &next.tuples, target)?;
            trajectory.push(Experience {
                state: state.clone(),
                action,
                reward: r,
                next_state: next.clone(),
            });
            state = next;
        }
        Ok((state, trajectory))
    }

    /// Action steps without rewards or storage (evaluation, head training
    /// under a frozen agent, and benchmark inference).
    pub fn advance(
        &self,
        initial: AgentState,
        steps: usize,
        epsilon: f64,
        rng: &mut impl Rng,
    ) -> Result<AgentState> {
        let mut state = initial;
        for _ in 0..steps {
            let action = self.select_action(&state, epsilon, rng)?;
            state = apply_action(&state, &action)?;
        }
        Ok(state)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let manifest = QNetManifest {
            cfg: self.cfg.clone(),
            base_feature_dim: self.base_feature_dim,
        };
        self.online
            .save(dir, serde_json::json!({"q_network": manifest}))
    }

    /// Loads the online parameters; the target is re-initialized as a copy of
    /// the loaded online network.
    pub fn load(dir: &Path) -> Result<Self> {
        let extra = ParamStore::read_extra(dir)?;
        let manifest: QNetManifest = serde_json::from_value(extra["q_network"].clone())
            .map_err(|e| Error::Checkpoint(format!("missing or malformed q-net manifest: {e}")))?;
        let mut net = QNetworkModel::new(&manifest.cfg, manifest.base_feature_dim, 0)?;
        net.online.load_values(dir)?;
        net.target = net.online.clone();
        Ok(net)
    }
}

/// Greedy move of one Q-table with deterministic tie-breaking: the strictly
/// greatest entry wins; ties keep the smallest (node, position).
pub(crate) fn argmax_move(table: &DenseMatrix) -> TupleMove {
    let mut best = TupleMove { position: 0, node: 0 };
    let mut best_val = table.get(0, 0);
    for node in 0..table.rows() {
        for position in 0..table.cols() {
            let v = table.get(node, position);
            if v > best_val {
                best_val = v;
                best = TupleMove { position, node };
            }
        }
    }
    best
}
