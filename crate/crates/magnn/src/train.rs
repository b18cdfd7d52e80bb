//! Training paradigms (ORD, SIMUL, PRE), the evaluation protocol, and the
//! metrics stream.
//!
//! The paradigms differ only in how the environment model and the Q-agent
//! take turns: ORD trains the environment on random tuples first and then
//! the agent against the frozen environment; SIMUL interleaves one
//! environment step and one agent step per outer step; PRE trains a fresh
//! environment head under a frozen, pre-trained agent.
//!
//! Every MPNN invocation is accounted for: the loops accumulate the
//! closed-form expectation alongside the measured counters and assert they
//! agree exactly.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::NodeTuple;
use crate::model::{Prediction, PredictionModel};
use crate::nn::{DenseMatrix, Tape};
use crate::rl::{AgentState, EpsilonSchedule, QNetworkModel, ReplayBuffer};
use crate::util::subseed;

/// Append-only CSV metrics stream with a versioned header.
pub struct MetricsWriter {
    out: std::io::BufWriter<std::fs::File>,
}

pub const METRICS_SCHEMA: &str = "# magnn-metrics-v1";
pub const METRICS_HEADER: &str = "step,phase,loss,reward_mean,epsilon,metric,mpnn_calls";

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{METRICS_SCHEMA}")?;
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(MetricsWriter { out })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn row(
        &mut self,
        step: u64,
        phase: &str,
        loss: Option<f64>,
        reward_mean: Option<f64>,
        epsilon: Option<f64>,
        metric: Option<f64>,
        mpnn_calls: u64,
    ) -> Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            self.out,
            "{step},{phase},{},{},{},{},{mpnn_calls}",
            fmt(loss),
            fmt(reward_mean),
            fmt(epsilon),
            fmt(metric)
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Where the tuple sets used for one environment step come from.
enum TupleProvider<'a> {
    /// Fresh uniform samples from V^k.
    Random,
    /// Random initialization advanced by the agent for `steps` greedy or
    /// epsilon-greedy actions.
    Agent {
        qnet: &'a QNetworkModel,
        steps: usize,
        epsilon: f64,
    },
}

/// Per-graph tuple sets for a batch, per the provider policy.
fn make_tuple_sets(
    provider: &TupleProvider,
    dataset: &Dataset,
    batch: &[usize],
    num_tuples: usize,
    order: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<NodeTuple>>> {
    let mut sets = Vec::with_capacity(batch.len());
    for &i in batch {
        let inst = &dataset.instances[i];
        if order == 0 {
            sets.push(Vec::new());
            continue;
        }
        let tuples: Vec<NodeTuple> = (0..num_tuples)
            .map(|_| NodeTuple::sample_uniform(&inst.graph, order, rng))
            .collect();
        match provider {
            TupleProvider::Random => sets.push(tuples),
            TupleProvider::Agent {
                qnet,
                steps,
                epsilon,
            } => {
                let state = AgentState {
                    graph: Arc::clone(&inst.graph),
                    tracker: DenseMatrix::zeros(num_tuples, qnet.config().tracker_width),
                    tuples,
                };
                let state = qnet.advance(state, *steps, *epsilon, rng)?;
                sets.push(state.tuples);
            }
        }
    }
    Ok(sets)
}

/// One optimizer step of the environment on a batch with fixed tuple sets.
/// Returns the batch loss.
fn env_step_with_tuples(
    env: &mut PredictionModel,
    dataset: &Dataset,
    batch: &[usize],
    tuple_sets: &[Vec<NodeTuple>],
    learning_rate: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let mut losses = Vec::with_capacity(batch.len());
    for (&i, tuples) in batch.iter().zip(tuple_sets) {
        let inst = &dataset.instances[i];
        losses.push(env.loss_on_tape(env.store(), &mut tape, &inst.graph, tuples, &inst.target)?);
    }
    let loss = tape.mean_scalars(&losses);
    let value = tape.scalar(loss);
    tape.backward(loss, env.store_mut())?;
    env.store_mut().adam_step(
        learning_rate,
        crate::nn::params::ADAM_BETA1,
        crate::nn::params::ADAM_BETA2,
        crate::nn::params::ADAM_EPS,
    );
    Ok(value)
}

/// Mean environment loss over a split with freshly sampled random tuples.
fn split_loss(
    env: &PredictionModel,
    dataset: &Dataset,
    indices: &[usize],
    num_tuples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let inst = &dataset.instances[i];
        let tuples: Vec<NodeTuple> = if env.order() == 0 {
            Vec::new()
        } else {
            (0..num_tuples)
                .map(|_| NodeTuple::sample_uniform(&inst.graph, env.order(), rng))
                .collect()
        };
        total += env.eval_loss(&inst.graph, &tuples, &inst.target)?;
    }
    Ok(total / indices.len() as f64)
}

#[derive(Clone, Debug)]
pub struct RandomTupleTraining {
    pub num_tuples: usize,
    pub order: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Step decay: lr multiplied by `lr_decay_factor` every
    /// `lr_decay_every` epochs (0 disables).
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
}

impl RandomTupleTraining {
    pub fn new(num_tuples: usize, order: usize, epochs: usize, batch_size: usize, seed: u64) -> Self {
        RandomTupleTraining {
            num_tuples,
            order,
            epochs,
            batch_size,
            learning_rate: 1e-3,
            lr_decay_factor: 1.0,
            lr_decay_every: 0,
            seed,
        }
    }
}

fn decayed_lr(base: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    if every == 0 {
        base
    } else {
        base * factor.powi((epoch / every) as i32)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RandomTupleReport {
    pub optimizer_steps: u64,
    pub epoch_losses: Vec<f64>,
}

/// Trains the environment on freshly sampled uniform tuples (one optimizer
/// step per batch). This is both the random-tuple baseline experiment and
/// phase 1 of ORD.
pub fn train_random_tuples(
    env: &mut PredictionModel,
    dataset: &Dataset,
    opts: &RandomTupleTraining,
) -> Result<RandomTupleReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    if opts.order != env.order() {
        return Err(Error::InvalidArgument(format!(
            "model consumes order-{} tuples, options say {}",
            env.order(),
            opts.order
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(opts.seed, "random-tuple-training"));
    let mut report = RandomTupleReport::default();
    let train_idx = dataset.indices(Some(Split::Train));
    let train_idx = if train_idx.is_empty() {
        dataset.indices(None)
    } else {
        train_idx
    };
    for epoch in 0..opts.epochs {
        let mut order_idx = train_idx.clone();
        order_idx.shuffle(&mut rng);
        let lr = decayed_lr(
            opts.learning_rate,
            opts.lr_decay_factor,
            opts.lr_decay_every,
            epoch,
        );
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order_idx.chunks(opts.batch_size) {
            let sets = make_tuple_sets(
                &TupleProvider::Random,
                dataset,
                batch,
                opts.num_tuples,
                env.order(),
                &mut rng,
            )?;
            epoch_loss += env_step_with_tuples(env, dataset, batch, &sets, lr)?;
            batches += 1;
            report.optimizer_steps += 1;
        }
        report.epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok(report)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrainReport {
    pub env_epochs_run: usize,
    pub env_optimizer_steps: u64,
    pub agent_outer_steps: u64,
    pub prefill_rollouts: u64,
    /// Every collected action reward, in collection order.
    pub action_rewards: Vec<f64>,
    pub final_env_loss: f64,
    pub env_mpnn_calls: u64,
    pub qnet_mpnn_calls: u64,
    pub expected_env_mpnn_calls: u64,
    pub expected_qnet_mpnn_calls: u64,
}

struct Accounting {
    expected_env: u64,
    expected_qnet: u64,
}

impl Accounting {
    fn new() -> Self {
        Accounting {
            expected_env: 0,
            expected_qnet: 0,
        }
    }

    fn env_batch(&mut self, batch_len: usize, m_eff: usize) {
        self.expected_env += (batch_len * m_eff) as u64;
    }

    fn rollout(&mut self, m: usize, t: usize) {
        // t Q-table evaluations of m marked copies, plus old/new environment
        // losses per step.
        self.expected_qnet += (m * t) as u64;
        self.expected_env += (2 * m * t) as u64;
    }

    fn advance(&mut self, m: usize, t: usize) {
        self.expected_qnet += (m * t) as u64;
    }

    fn td(&mut self, batch: usize, m: usize) {
        // Online pass + target pass per experience.
        self.expected_qnet += (2 * batch * m) as u64;
    }
}

fn check_dataset(cfg: &RunConfig, dataset: &Dataset) -> Result<(Vec<usize>, usize)> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let train_idx = {
        let t = dataset.indices(Some(Split::Train));
        if t.is_empty() {
            dataset.indices(None)
        } else {
            t
        }
    };
    let base_dim = dataset.instances[train_idx[0]].graph.raw_feature_dim();
    let _ = cfg;
    Ok((train_idx, base_dim))
}

fn sample_batch(idx: &[usize], size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let amount = size.min(idx.len());
    rand::seq::index::sample(rng, idx.len(), amount)
        .into_iter()
        .map(|i| idx[i])
        .collect()
}

/// Environment-training epochs shared by ORD phase 1, PRE and SIMUL's env
/// side. Returns (epochs run, optimizer steps, mean loss of last epoch).
#[allow(clippy::too_many_arguments)]
#[allow(clippy::type_complexity)]
fn env_epochs(
    env: &mut PredictionModel,
    dataset: &Dataset,
    train_idx: &[usize],
    provider: &TupleProvider,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    lr_decay: (f64, usize),
    num_tuples: usize,
    patience: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
    acct: &mut Accounting,
    metrics: &mut Option<&mut MetricsWriter>,
    phase: &str,
    qnet_calls_of_provider: usize, // m*t per graph when the provider is an agent
) -> Result<(usize, u64, f64)> {
    let valid_idx = dataset.indices(Some(Split::Valid));
    let mut valid_rng = ChaCha8Rng::seed_from_u64(subseed(seed, "early-stop"));
    let mut best_valid = f64::INFINITY;
    let mut since_best = 0usize;
    let mut steps = 0u64;
    let mut last_loss = f64::NAN;
    let mut epochs_run = 0usize;
    for epoch in 0..epochs {
        let mut order_idx = train_idx.to_vec();
        order_idx.shuffle(rng);
        let lr = decayed_lr(learning_rate, lr_decay.0, lr_decay.1, epoch);
        let mut epoch_loss = 0.0;
        let mut batches = 0u64;
        for batch in order_idx.chunks(batch_size) {
            let sets = make_tuple_sets(provider, dataset, batch, num_tuples, env.order(), rng)?;
            acct.expected_qnet += (batch.len() * qnet_calls_of_provider) as u64;
            acct.env_batch(batch.len(), if env.order() == 0 { 1 } else { num_tuples });
            epoch_loss += env_step_with_tuples(env, dataset, batch, &sets, lr)?;
            batches += 1;
        }
        steps += batches;
        last_loss = epoch_loss / batches as f64;
        epochs_run = epoch + 1;
        if let Some(w) = metrics.as_deref_mut() {
            w.row(
                epoch as u64,
                phase,
                Some(last_loss),
                None,
                None,
                None,
                env.mpnn_calls(),
            )?;
        }
        if patience > 0 && !valid_idx.is_empty() {
            let m_eff = if env.order() == 0 { 1 } else { num_tuples };
            acct.env_batch(valid_idx.len(), m_eff);
            let vl = split_loss(env, dataset, &valid_idx, num_tuples, &mut valid_rng)?;
            if vl + 1e-12 < best_valid {
                best_valid = vl;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break;
                }
            }
        }
    }
    Ok((epochs_run, steps, last_loss))
}

/// ORD: trains the environment on random tuples, freezes it, then trains the
/// agent with experience replay against it.
pub fn ord_train(
    cfg: &RunConfig,
    dataset: &Dataset,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<(PredictionModel, QNetworkModel, TrainReport)> {
    let (train_idx, base_dim) = check_dataset(cfg, dataset)?;
    let mut report = TrainReport::default();
    let mut acct = Accounting::new();
    let m = cfg.agent.m;
    let t = cfg.agent.t;

    // Phase 1: environment on random tuples.
    let mut env = PredictionModel::new(
        dataset.task,
        cfg.agent.k,
        base_dim,
        &cfg.encoder_config(),
        subseed(cfg.seed, "env-init"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "env-train"));
    let (epochs_run, env_steps, final_env_loss) = env_epochs(
        &mut env,
        dataset,
        &train_idx,
        &TupleProvider::Random,
        cfg.train.epochs,
        cfg.train.batch_size,
        cfg.train.learning_rate,
        (cfg.train.lr_decay_factor, cfg.train.lr_decay_every),
        m,
        cfg.train.early_stop_patience,
        cfg.seed,
        &mut rng,
        &mut acct,
        &mut metrics,
        "env",
        0,
    )?;
    report.env_epochs_run = epochs_run;
    report.env_optimizer_steps = env_steps;
    report.final_env_loss = final_env_loss;

    // Phase 2: frozen environment, experience replay on the agent.
    let env = env; // immutable from here on
    let mut qnet = QNetworkModel::new(
        &cfg.qnet_config(),
        base_dim,
        subseed(cfg.seed, "agent-init"),
    )?;
    let mut arng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "agent-train"));
    let schedule = EpsilonSchedule {
        start: cfg.agent.epsilon_start,
        end: cfg.agent.epsilon_end,
        decay_steps: (cfg.train.agent_steps as f64 * cfg.agent.epsilon_decay_frac) as u64,
    };
    let mut buffer = ReplayBuffer::new(cfg.agent.buffer_capacity);

    if cfg.train.agent_steps > 0 {
        let prefill_target = cfg.agent.batch_size.min(cfg.agent.buffer_capacity);
        while buffer.len() < prefill_target {
            let i = train_idx[arng.gen_range(0..train_idx.len())];
            let inst = &dataset.instances[i];
            let state = AgentState::random_init(
                Arc::clone(&inst.graph),
                m,
                cfg.agent.k,
                cfg.agent.tracker_width,
                &mut arng,
            );
            let (_, traj) = qnet.rollout(
                &env,
                &inst.target,
                state,
                t,
                cfg.agent.epsilon_start,
                &mut arng,
            )?;
            acct.rollout(m, t);
            for e in traj {
                buffer.push(e);
            }
            report.prefill_rollouts += 1;
        }

        for outer in 0..cfg.train.agent_steps as u64 {
            let epsilon = schedule.value(outer);
            let i = train_idx[arng.gen_range(0..train_idx.len())];
            let inst = &dataset.instances[i];
            let state = AgentState::random_init(
                Arc::clone(&inst.graph),
                m,
                cfg.agent.k,
                cfg.agent.tracker_width,
                &mut arng,
            );
            let (_, traj) = qnet.rollout(&env, &inst.target, state, t, epsilon, &mut arng)?;
            acct.rollout(m, t);
            let reward_mean = traj.iter().map(|e| e.reward).sum::<f64>() / t.max(1) as f64;
            for e in traj {
                report.action_rewards.push(e.reward);
                buffer.push(e);
            }
            let batch = buffer.sample(cfg.agent.batch_size, &mut arng);
            let loss = qnet.td_optimize(&batch, cfg.agent.discount, cfg.agent.learning_rate)?;
            acct.td(cfg.agent.batch_size, m);
            if qnet.steps_since_sync() >= cfg.agent.sync_rate {
                qnet.sync_target()?;
            }
            report.agent_outer_steps += 1;
            if let Some(w) = metrics.as_deref_mut() {
                w.row(
                    outer,
                    "agent",
                    Some(loss),
                    Some(reward_mean),
                    Some(epsilon),
                    None,
                    env.mpnn_calls() + qnet.mpnn_calls(),
                )?;
            }
        }
    }

    finish_report(&mut report, &acct, &env, &qnet)?;
    Ok((env, qnet, report))
}

/// SIMUL: per outer step, one environment optimizer step on agent-chosen
/// tuples, then one agent optimizer step on replayed experience collected
/// from a freshly sampled graph. Rewards stored in the buffer keep the
/// environment loss values they were computed under.
pub fn simul_train(
    cfg: &RunConfig,
    dataset: &Dataset,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<(PredictionModel, QNetworkModel, TrainReport)> {
    let (train_idx, base_dim) = check_dataset(cfg, dataset)?;
    let mut report = TrainReport::default();
    let mut acct = Accounting::new();
    let m = cfg.agent.m;
    let t = cfg.agent.t;

    let mut env = PredictionModel::new(
        dataset.task,
        cfg.agent.k,
        base_dim,
        &cfg.encoder_config(),
        subseed(cfg.seed, "env-init"),
    )?;
    let mut qnet = QNetworkModel::new(
        &cfg.qnet_config(),
        base_dim,
        subseed(cfg.seed, "agent-init"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "simul-train"));
    let schedule = EpsilonSchedule {
        start: cfg.agent.epsilon_start,
        end: cfg.agent.epsilon_end,
        decay_steps: (cfg.train.agent_steps as f64 * cfg.agent.epsilon_decay_frac) as u64,
    };
    let mut buffer = ReplayBuffer::new(cfg.agent.buffer_capacity);

    let prefill_target = cfg.agent.batch_size.min(cfg.agent.buffer_capacity);
    while buffer.len() < prefill_target {
        let i = train_idx[rng.gen_range(0..train_idx.len())];
        let inst = &dataset.instances[i];
        let state = AgentState::random_init(
            Arc::clone(&inst.graph),
            m,
            cfg.agent.k,
            cfg.agent.tracker_width,
            &mut rng,
        );
        let (_, traj) = qnet.rollout(
            &env,
            &inst.target,
            state,
            t,
            cfg.agent.epsilon_start,
            &mut rng,
        )?;
        acct.rollout(m, t);
        for e in traj {
            buffer.push(e);
        }
        report.prefill_rollouts += 1;
    }

    let mut last_env_loss = f64::NAN;
    for outer in 0..cfg.train.agent_steps as u64 {
        let epsilon = schedule.value(outer);

        // Environment side: one optimizer step on agent-advanced tuples.
        let batch = sample_batch(&train_idx, cfg.train.batch_size, &mut rng);
        let provider = TupleProvider::Agent {
            qnet: &qnet,
            steps: t,
            epsilon,
        };
        let sets = make_tuple_sets(&provider, dataset, &batch, m, env.order(), &mut rng)?;
        for _ in &batch {
            acct.advance(m, t);
        }
        acct.env_batch(batch.len(), m);
        let env_lr = decayed_lr(
            cfg.train.learning_rate,
            cfg.train.lr_decay_factor,
            cfg.train.lr_decay_every,
            outer as usize,
        );
        last_env_loss = env_step_with_tuples(&mut env, dataset, &batch, &sets, env_lr)?;
        report.env_optimizer_steps += 1;

        // Agent side: collect one rollout on a second, independent draw.
        let i = train_idx[rng.gen_range(0..train_idx.len())];
        let inst = &dataset.instances[i];
        let state = AgentState::random_init(
            Arc::clone(&inst.graph),
            m,
            cfg.agent.k,
            cfg.agent.tracker_width,
            &mut rng,
        );
        let (_, traj) = qnet.rollout(&env, &inst.target, state, t, epsilon, &mut rng)?;
        acct.rollout(m, t);
        let reward_mean = traj.iter().map(|e| e.reward).sum::<f64>() / t.max(1) as f64;
        for e in traj {
            report.action_rewards.push(e.reward);
            buffer.push(e);
        }
        let replay = buffer.sample(cfg.agent.batch_size, &mut rng);
        let loss = qnet.td_optimize(&replay, cfg.agent.discount, cfg.agent.learning_rate)?;
        acct.td(cfg.agent.batch_size, m);
        if qnet.steps_since_sync() >= cfg.agent.sync_rate {
            qnet.sync_target()?;
        }
        report.agent_outer_steps += 1;
        if let Some(w) = metrics.as_deref_mut() {
            w.row(
                outer,
                "simul",
                Some(loss),
                Some(reward_mean),
                Some(epsilon),
                Some(last_env_loss),
                env.mpnn_calls() + qnet.mpnn_calls(),
            )?;
        }
    }
    report.final_env_loss = last_env_loss;

    finish_report(&mut report, &acct, &env, &qnet)?;
    Ok((env, qnet, report))
}

/// PRE: a frozen, pre-trained agent supplies the tuples; only the fresh
/// environment model trains. With `t = 0` this degenerates exactly to
/// random-tuple training.
pub fn pre_train_head(
    cfg: &RunConfig,
    agent: &QNetworkModel,
    dataset: &Dataset,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<(PredictionModel, TrainReport)> {
    let (train_idx, base_dim) = check_dataset(cfg, dataset)?;
    if agent.order() != cfg.agent.k {
        return Err(Error::InvalidArgument(format!(
            "agent checkpoint has order {}, config says k = {}",
            agent.order(),
            cfg.agent.k
        )));
    }
    let mut report = TrainReport::default();
    let mut acct = Accounting::new();
    let m = cfg.agent.m;
    let t = cfg.agent.t;

    let mut env = PredictionModel::new(
        dataset.task,
        cfg.agent.k,
        base_dim,
        &cfg.encoder_config(),
        subseed(cfg.seed, "env-init"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "env-train"));
    let provider = TupleProvider::Agent {
        qnet: agent,
        steps: t,
        epsilon: 0.0,
    };
    let (epochs_run, env_steps, final_env_loss) = env_epochs(
        &mut env,
        dataset,
        &train_idx,
        &provider,
        cfg.train.epochs,
        cfg.train.batch_size,
        cfg.train.learning_rate,
        (cfg.train.lr_decay_factor, cfg.train.lr_decay_every),
        m,
        cfg.train.early_stop_patience,
        cfg.seed,
        &mut rng,
        &mut acct,
        &mut metrics,
        "pre",
        m * t,
    )?;
    report.env_epochs_run = epochs_run;
    report.env_optimizer_steps = env_steps;
    report.final_env_loss = final_env_loss;

    finish_report(&mut report, &acct, &env, agent)?;
    Ok((env, report))
}

fn finish_report(
    report: &mut TrainReport,
    acct: &Accounting,
    env: &PredictionModel,
    qnet: &QNetworkModel,
) -> Result<()> {
    report.env_mpnn_calls = env.mpnn_calls();
    report.qnet_mpnn_calls = qnet.mpnn_calls();
    report.expected_env_mpnn_calls = acct.expected_env;
    report.expected_qnet_mpnn_calls = acct.expected_qnet;
    // The invocation counters must be exactly reconstructible from the
    // closed-form accounting; a mismatch means the complexity story is wrong.
    assert_eq!(
        report.env_mpnn_calls, report.expected_env_mpnn_calls,
        "environment MPNN call accounting drifted"
    );
    assert_eq!(
        report.qnet_mpnn_calls, report.expected_qnet_mpnn_calls,
        "q-network MPNN call accounting drifted"
    );
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub repeats: usize,
    pub steps: usize,
    pub num_tuples: usize,
    pub seed: u64,
    pub split: Option<Split>,
    pub curve: bool,
    /// Also report the per-graph final metric, averaged over repeats.
    pub per_graph: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub metric_name: String,
    pub mean: f64,
    /// Sample standard deviation across repeats.
    pub std: f64,
    pub per_repeat: Vec<f64>,
    /// Mean metric after 0..=steps agent steps (present when requested).
    pub curve: Option<Vec<f64>>,
    /// Final metric per graph, averaged over repeats (present when requested).
    pub per_graph: Option<Vec<f64>>,
    pub env_mpnn_calls: u64,
    pub qnet_mpnn_calls: u64,
}

/// Evaluation protocol: per repeat and graph, sample fresh random tuples,
/// run `steps` greedy agent steps, and score the prediction; report the mean
/// and spread over repeats, plus the per-step curve when asked.
pub fn evaluate(
    env: &PredictionModel,
    agent: Option<&QNetworkModel>,
    dataset: &Dataset,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if opts.repeats < 1 {
        return Err(Error::InvalidArgument("eval repeats must be >= 1".into()));
    }
    if opts.steps > 0 && agent.is_none() {
        return Err(Error::InvalidArgument(
            "agent steps requested but no agent supplied".into(),
        ));
    }
    if env.order() == 0 && opts.steps > 0 {
        return Err(Error::InvalidArgument(
            "plain models cannot take agent steps".into(),
        ));
    }
    let idx = dataset.indices(opts.split);
    if idx.is_empty() {
        return Err(Error::InvalidArgument("evaluation split is empty".into()));
    }
    let env_calls_before = env.mpnn_calls();
    let qnet_calls_before = agent.map(|a| a.mpnn_calls()).unwrap_or(0);
    let tracker_width = agent.map(|a| a.config().tracker_width).unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(opts.seed, "evaluate"));

    let mut per_repeat = Vec::with_capacity(opts.repeats);
    let mut curve_acc = vec![0.0f64; opts.steps + 1];
    let mut per_graph_acc = vec![0.0f64; idx.len()];
    for _ in 0..opts.repeats {
        let mut final_sum = 0.0;
        for (slot, &i) in idx.iter().enumerate() {
            let inst = &dataset.instances[i];
            if env.order() == 0 {
                let pred = env.encode_plain(&inst.graph)?;
                let metric = env.metric(&pred, &inst.target)?;
                final_sum += metric;
                curve_acc[0] += metric;
                per_graph_acc[slot] += metric;
                continue;
            }
            let mut state = AgentState::random_init(
                Arc::clone(&inst.graph),
                opts.num_tuples,
                env.order(),
                tracker_width,
                &mut rng,
            );
            if opts.curve {
                for step in 0..=opts.steps {
                    let pred = env.encode_set(&inst.graph, &state.tuples)?;
                    let metric = env.metric(&pred, &inst.target)?;
                    curve_acc[step] += metric;
                    if step == opts.steps {
                        final_sum += metric;
                        per_graph_acc[slot] += metric;
                    } else {
                        state = agent.expect("checked").advance(state, 1, 0.0, &mut rng)?;
                    }
                }
            } else {
                if opts.steps > 0 {
                    state =
                        agent.expect("checked").advance(state, opts.steps, 0.0, &mut rng)?;
                }
                let pred = env.encode_set(&inst.graph, &state.tuples)?;
                let metric = env.metric(&pred, &inst.target)?;
                final_sum += metric;
                per_graph_acc[slot] += metric;
            }
        }
        per_repeat.push(final_sum / idx.len() as f64);
    }

    let n = per_repeat.len() as f64;
    let mean = per_repeat.iter().sum::<f64>() / n;
    let std = if per_repeat.len() > 1 {
        (per_repeat.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let curve = if opts.curve {
        Some(
            curve_acc
                .iter()
                .map(|&c| c / (opts.repeats * idx.len()) as f64)
                .collect(),
        )
    } else {
        None
    };
    let per_graph = if opts.per_graph {
        Some(
            per_graph_acc
                .iter()
                .map(|&c| c / opts.repeats as f64)
                .collect(),
        )
    } else {
        None
    };

    let m_eff = if env.order() == 0 { 1 } else { opts.num_tuples };
    let expected_env = (opts.repeats * idx.len()) as u64
        * m_eff as u64
        * if opts.curve && env.order() != 0 {
            (opts.steps + 1) as u64
        } else {
            1
        };
    let measured_env = env.mpnn_calls() - env_calls_before;
    assert_eq!(measured_env, expected_env, "evaluation env call accounting drifted");
    let expected_qnet = if env.order() == 0 {
        0
    } else {
        (opts.repeats * idx.len() * opts.num_tuples * opts.steps) as u64
    };
    let measured_qnet = agent.map(|a| a.mpnn_calls() - qnet_calls_before).unwrap_or(0);
    assert_eq!(measured_qnet, expected_qnet, "evaluation qnet call accounting drifted");

    Ok(EvalReport {
        metric_name: if env.metric_is_accuracy() {
            "accuracy".into()
        } else {
            "mae".into()
        },
        mean,
        std,
        per_repeat,
        curve,
        per_graph,
        env_mpnn_calls: measured_env,
        qnet_mpnn_calls: measured_qnet,
    })
}

/// Mean prediction over every single-node marking, then argmax; the
/// expected-accuracy evaluation of the random-tuple experiment.
pub fn expected_accuracy_over_all_markings(
    env: &PredictionModel,
    dataset: &Dataset,
) -> Result<f64> {
    let mut correct = 0usize;
    for inst in &dataset.instances {
        let n = inst.graph.num_nodes();
        let mut mean: Option<Vec<f64>> = None;
        for v in 0..n {
            let tuple = NodeTuple::new(vec![v])?;
            let Prediction::Graph(p) = env.encode_set(&inst.graph, &[tuple])? else {
                return Err(Error::InvalidArgument("expected a graph-level model".into()));
            };
            match &mut mean {
                None => mean = Some(p),
                Some(acc) => {
                    for (a, x) in acc.iter_mut().zip(&p) {
                        *a += x;
                    }
                }
            }
        }
        let mean = mean.expect("graphs are nonempty");
        let pred = Prediction::Graph(mean);
        if env.metric(&pred, &inst.target)? == 1.0 {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}
