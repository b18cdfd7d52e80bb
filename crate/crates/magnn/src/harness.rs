//! Command implementations behind the CLI: dataset generation, training,
//! evaluation, the MPNN-call benchmark, oracle queries, and run persistence.
//!
//! A completed run directory holds a config snapshot, checkpoints, the
//! metrics CSV, a train report, a manifest, and a `COMPLETE` marker; the
//! directory is treated as immutable afterwards.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{Paradigm, RunConfig};
use crate::dataset::{
    build_csl_dataset, build_cycle_count_dataset, build_cycle_pair_dataset,
    build_exp_pair_dataset, build_srg_dataset, build_supergraph_dataset, Dataset, DatasetManifest,
    GraphRecord, Split,
};
use crate::error::{Error, Result};
use crate::generators;
use crate::graph::Graph;
use crate::model::PredictionModel;
use crate::rl::{AgentState, QNetworkModel};
use crate::train::{
    evaluate, ord_train, pre_train_head, simul_train, EvalOptions, EvalReport, MetricsWriter,
    TrainReport,
};
use crate::util::{subseed, Fnv64};
use crate::wl::{brute_force_discriminative, distinguishable, DEFAULT_TUPLE_BUDGET};

pub const RUN_ROOT_ENV: &str = "MAGNN_RUN_ROOT";
pub const COMPLETE_MARKER: &str = "COMPLETE";
pub const ENV_CHECKPOINT_DIR: &str = "env_checkpoint";
pub const AGENT_CHECKPOINT_DIR: &str = "agent_checkpoint";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    pub run_id: String,
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Dataset families the `gen` command can produce.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GenSpec {
    Csl {
        n: usize,
        skips: Vec<usize>,
        per_class: usize,
        seed: u64,
    },
    Supergraph {
        n: usize,
        positive: usize,
        negative: usize,
        seed: u64,
    },
    Cycles {
        count: usize,
        nodes: usize,
        edge_prob: f64,
        train_frac: f64,
        seed: u64,
    },
    Srg {
        copies: usize,
        seed: u64,
    },
    CyclePair,
    ExpPairs {
        pairs: usize,
        seed: u64,
    },
}

impl GenSpec {
    fn build(&self) -> Result<Dataset> {
        match self {
            GenSpec::Csl {
                n,
                skips,
                per_class,
                seed,
            } => build_csl_dataset(*n, skips, *per_class, *seed),
            GenSpec::Supergraph {
                n,
                positive,
                negative,
                seed,
            } => build_supergraph_dataset(*n, *positive, *negative, *seed),
            GenSpec::Cycles {
                count,
                nodes,
                edge_prob,
                train_frac,
                seed,
            } => build_cycle_count_dataset(*count, *nodes, *edge_prob, *train_frac, *seed),
            GenSpec::Srg { copies, seed } => build_srg_dataset(*copies, *seed),
            GenSpec::CyclePair => build_cycle_pair_dataset(),
            GenSpec::ExpPairs { pairs, seed } => build_exp_pair_dataset(*pairs, *seed),
        }
    }
}

/// Generates a dataset into `out_dir`. Refuses a non-empty existing
/// directory unless `force` is set.
pub fn cmd_gen(spec: &GenSpec, out_dir: &Path, force: bool) -> Result<DatasetManifest> {
    if out_dir.exists() {
        let non_empty = std::fs::read_dir(out_dir)?.next().is_some();
        if non_empty && !force {
            return Err(Error::InvalidArgument(format!(
                "output directory {} is not empty (use --force to overwrite)",
                out_dir.display()
            )));
        }
    }
    let dataset = spec.build()?;
    dataset.save(out_dir)?;
    Ok(dataset.manifest())
}

/// Resolves the run root: explicit flag, then MAGNN_RUN_ROOT, then the
/// config, then `./runs`.
pub fn resolve_run_root(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var(RUN_ROOT_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    if let Some(root) = &cfg.run_root {
        return PathBuf::from(root);
    }
    PathBuf::from("runs")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentSidecar {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub agent_outer_steps: u64,
    pub steps_since_sync: u64,
    pub buffer_capacity: usize,
    /// Buffer contents are not persisted; only their statistics.
    pub collected_experiences: u64,
    pub reward_mean_overall: f64,
}

/// Trains per the configured paradigm and persists a complete run directory.
/// Returns the run directory path.
pub fn cmd_train(
    cfg: &RunConfig,
    config_path: Option<&Path>,
    run_root_flag: Option<&Path>,
) -> Result<PathBuf> {
    cfg.validate()?;
    let started = unix_now();
    let mut dataset = Dataset::load(Path::new(&cfg.dataset))?;
    if let Some(col) = cfg.train.target_column {
        dataset = dataset.with_target_column(col)?;
    }

    let root = resolve_run_root(run_root_flag, cfg);
    let run_id = {
        let mut h = Fnv64::new();
        h.write(cfg.hash().as_bytes());
        h.write_u64(cfg.seed);
        h.write_u64(started);
        h.write_u64(std::process::id() as u64);
        format!("{:016x}", h.finish())
    };
    let run_dir = root.join(format!("run-{run_id}"));
    std::fs::create_dir_all(&run_dir)?;
    std::fs::write(run_dir.join("config.toml"), cfg.to_toml_string())?;
    let mut metrics = MetricsWriter::create(&run_dir.join("metrics.csv"))?;

    let mut artifacts: Vec<String> = vec!["config.toml".into(), "metrics.csv".into()];
    let report: TrainReport = match cfg.paradigm {
        Paradigm::Ord => {
            let (env, agent, report) = ord_train(cfg, &dataset, Some(&mut metrics))?;
            env.save(&run_dir.join(ENV_CHECKPOINT_DIR))?;
            agent.save(&run_dir.join(AGENT_CHECKPOINT_DIR))?;
            write_sidecar(&run_dir, cfg, &agent, &report)?;
            artifacts.push(ENV_CHECKPOINT_DIR.into());
            artifacts.push(AGENT_CHECKPOINT_DIR.into());
            report
        }
        Paradigm::Simul => {
            let (env, agent, report) = simul_train(cfg, &dataset, Some(&mut metrics))?;
            env.save(&run_dir.join(ENV_CHECKPOINT_DIR))?;
            agent.save(&run_dir.join(AGENT_CHECKPOINT_DIR))?;
            write_sidecar(&run_dir, cfg, &agent, &report)?;
            artifacts.push(ENV_CHECKPOINT_DIR.into());
            artifacts.push(AGENT_CHECKPOINT_DIR.into());
            report
        }
        Paradigm::Pre => {
            let ckpt = cfg.train.pre_checkpoint.as_deref().expect("validated");
            let agent = QNetworkModel::load(Path::new(ckpt))?;
            let (env, report) = pre_train_head(cfg, &agent, &dataset, Some(&mut metrics))?;
            env.save(&run_dir.join(ENV_CHECKPOINT_DIR))?;
            artifacts.push(ENV_CHECKPOINT_DIR.into());
            // The frozen agent stays where it came from; record the source.
            std::fs::write(
                run_dir.join("agent_source.json"),
                serde_json::to_string_pretty(&serde_json::json!({ "path": ckpt }))?,
            )?;
            artifacts.push("agent_source.json".into());
            report
        }
    };
    metrics.flush()?;

    std::fs::write(
        run_dir.join("train_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    artifacts.push("train_report.json".into());

    let manifest = ExperimentManifest {
        command: "train".into(),
        config_path: config_path.map(|p| p.display().to_string()),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        run_id,
        artifacts,
        started_unix: started,
        finished_unix: unix_now(),
    };
    std::fs::write(
        run_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    std::fs::write(run_dir.join(COMPLETE_MARKER), "")?;
    Ok(run_dir)
}

fn write_sidecar(
    run_dir: &Path,
    cfg: &RunConfig,
    agent: &QNetworkModel,
    report: &TrainReport,
) -> Result<()> {
    let collected = report.action_rewards.len() as u64;
    let sidecar = AgentSidecar {
        epsilon_start: cfg.agent.epsilon_start,
        epsilon_end: cfg.agent.epsilon_end,
        epsilon_decay_steps: (cfg.train.agent_steps as f64 * cfg.agent.epsilon_decay_frac) as u64,
        agent_outer_steps: report.agent_outer_steps,
        steps_since_sync: agent.steps_since_sync(),
        buffer_capacity: cfg.agent.buffer_capacity,
        collected_experiences: collected,
        reward_mean_overall: if collected == 0 {
            0.0
        } else {
            report.action_rewards.iter().sum::<f64>() / collected as f64
        },
    };
    std::fs::write(
        run_dir.join(AGENT_CHECKPOINT_DIR).join("sidecar.json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub run_dir: PathBuf,
    /// Dataset override; defaults to the run's configured dataset.
    pub dataset: Option<PathBuf>,
    pub repeats: usize,
    pub steps: Option<usize>,
    pub split: Option<Split>,
    pub seed: u64,
    pub curve: bool,
    pub per_graph_csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Evaluates a finished run; writes a JSON report (and an optional per-graph
/// CSV) and returns the report.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let cfg_text = std::fs::read_to_string(args.run_dir.join("config.toml"))?;
    let cfg = RunConfig::from_toml_str(&cfg_text)?;
    let env = PredictionModel::load(&args.run_dir.join(ENV_CHECKPOINT_DIR))?;

    let agent_dir = args.run_dir.join(AGENT_CHECKPOINT_DIR);
    let agent = if agent_dir.exists() {
        Some(QNetworkModel::load(&agent_dir)?)
    } else if args.run_dir.join("agent_source.json").exists() {
        let src: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(
            args.run_dir.join("agent_source.json"),
        )?)?;
        let path = src["path"]
            .as_str()
            .ok_or_else(|| Error::Checkpoint("agent_source.json has no path".into()))?;
        Some(QNetworkModel::load(Path::new(path))?)
    } else {
        None
    };

    let mut dataset = match &args.dataset {
        Some(p) => Dataset::load(p)?,
        None => Dataset::load(Path::new(&cfg.dataset))?,
    };
    if let Some(col) = cfg.train.target_column {
        dataset = dataset.with_target_column(col)?;
    }

    let steps = args.steps.unwrap_or(cfg.agent.t);
    let opts = EvalOptions {
        repeats: args.repeats,
        steps,
        num_tuples: cfg.agent.m,
        seed: args.seed,
        split: args.split,
        curve: args.curve,
        per_graph: args.per_graph_csv.is_some(),
    };
    let report = evaluate(&env, agent.as_ref(), &dataset, &opts)?;

    if let Some(csv_path) = &args.per_graph_csv {
        let mut text = String::from("graph_index,metric\n");
        if let Some(per_graph) = &report.per_graph {
            for (i, v) in per_graph.iter().enumerate() {
                text.push_str(&format!("{i},{v}\n"));
            }
        }
        std::fs::write(csv_path, text)?;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.run_dir.join("eval_report.json"));
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub dataset: Option<PathBuf>,
    pub graphs: usize,
    pub nodes: usize,
    pub edge_prob: f64,
    pub num_tuples: usize,
    pub order: usize,
    pub steps: usize,
    pub seed: u64,
    pub budget: u64,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchGraphReport {
    pub nodes: usize,
    /// `|V|^k`: encoder calls of the full-enumeration subgraph GNN.
    pub enumeration_calls: Option<u64>,
    pub enumeration_wall_ms: Option<f64>,
    pub enumeration_skipped: bool,
    /// `m*t`: environment-encoder calls of MAG-GNN inference (one prediction
    /// per step, step 0 excluded).
    pub mag_env_calls: u64,
    /// `m*t`: Q-table encoder calls, reported separately.
    pub mag_qnet_calls: u64,
    pub mag_wall_ms: f64,
    /// `|V|^k / (m*t*c)` with c = 1 environment-encoder call per tuple per
    /// step.
    pub call_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub num_tuples: usize,
    pub order: usize,
    pub steps: usize,
    /// Per-step environment-encoder constant c of the ratio formula.
    pub per_step_constant: u64,
    pub partial: bool,
    pub graphs: Vec<BenchGraphReport>,
}

/// Counts MPNN invocations and wall time of MAG-GNN inference versus full
/// `k`-tuple enumeration, asserting the measured counters match the closed
/// forms `m*t` and `|V|^k` exactly.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    use rand::SeedableRng;
    let graphs: Vec<Graph> = match &args.dataset {
        Some(dir) => {
            let ds = Dataset::load(dir)?;
            ds.instances.iter().map(|i| (*i.graph).clone()).collect()
        }
        None => {
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(subseed(args.seed, "bench-graphs"));
            (0..args.graphs)
                .map(|_| generators::erdos_renyi(args.nodes, args.edge_prob, &mut rng))
                .collect()
        }
    };
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("bench needs at least one graph".into()));
    }
    if args.steps == 0 || args.num_tuples == 0 {
        return Err(Error::InvalidArgument("bench needs m >= 1 and t >= 1".into()));
    }

    let base_dim = graphs[0].raw_feature_dim();
    let env = PredictionModel::new(
        crate::dataset::TaskKind::GraphClass { num_classes: 2 },
        args.order,
        base_dim,
        &crate::model::EncoderConfig::default(),
        subseed(args.seed, "bench-env"),
    )?;
    let qnet = QNetworkModel::new(
        &crate::rl::QNetConfig {
            order: args.order,
            ..crate::rl::QNetConfig::default()
        },
        base_dim,
        subseed(args.seed, "bench-agent"),
    )?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(subseed(args.seed, "bench-run"));

    let mut partial = false;
    let mut reports = Vec::new();
    for g in &graphs {
        let n = g.num_nodes();
        // Full enumeration.
        env.reset_mpnn_calls();
        let t0 = Instant::now();
        let (enumeration_calls, enumeration_wall_ms, skipped) =
            match env.full_subgraph_gnn(g, args.order, args.budget) {
                Ok((_, calls)) => {
                    let expected = (n as u64).pow(args.order as u32);
                    if calls != expected || env.mpnn_calls() != expected {
                        return Err(Error::State(format!(
                            "enumeration counter {calls} does not match closed form {expected}"
                        )));
                    }
                    (
                        Some(calls),
                        Some(t0.elapsed().as_secs_f64() * 1e3),
                        false,
                    )
                }
                Err(Error::Budget { .. }) => {
                    partial = true;
                    (None, None, true)
                }
                Err(e) => return Err(e),
            };

        // MAG-GNN inference: t steps, prediction after each step.
        env.reset_mpnn_calls();
        qnet.reset_mpnn_calls();
        let t1 = Instant::now();
        let graph = std::sync::Arc::new(g.clone());
        let mut state = AgentState::random_init(
            std::sync::Arc::clone(&graph),
            args.num_tuples,
            args.order,
            qnet.config().tracker_width,
            &mut rng,
        );
        for _ in 0..args.steps {
            state = qnet.advance(state, 1, 0.0, &mut rng)?;
            let _ = env.encode_set(&graph, &state.tuples)?;
        }
        let mag_wall_ms = t1.elapsed().as_secs_f64() * 1e3;
        let expected_mag = (args.num_tuples * args.steps) as u64;
        if env.mpnn_calls() != expected_mag || qnet.mpnn_calls() != expected_mag {
            return Err(Error::State(format!(
                "mag counters env={} qnet={} do not match closed form {expected_mag}",
                env.mpnn_calls(),
                qnet.mpnn_calls()
            )));
        }

        reports.push(BenchGraphReport {
            nodes: n,
            enumeration_calls,
            enumeration_wall_ms,
            enumeration_skipped: skipped,
            mag_env_calls: expected_mag,
            mag_qnet_calls: expected_mag,
            mag_wall_ms,
            call_ratio: enumeration_calls.map(|e| e as f64 / expected_mag as f64),
        });
    }

    let report = BenchReport {
        num_tuples: args.num_tuples,
        order: args.order,
        steps: args.steps,
        per_step_constant: 1,
        partial,
        graphs: reports,
    };
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Graph pairs the oracle command understands.
#[derive(Clone, Debug)]
pub enum PairSpec {
    Srg,
    Csl { n: usize, s1: usize, s2: usize },
    CycleUnions { left: Vec<usize>, right: Vec<usize> },
    Files { left: PathBuf, right: PathBuf },
}

impl PairSpec {
    /// Accepted forms: `srg`, `csl:<n>:<s1>:<s2>`,
    /// `cycles:<l1,l2,..>/<l1,..>`, `files:<left.json>:<right.json>`.
    pub fn parse(text: &str) -> Result<PairSpec> {
        if text == "srg" {
            return Ok(PairSpec::Srg);
        }
        if let Some(rest) = text.strip_prefix("csl:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidArgument(
                    "csl pair spec needs csl:<n>:<s1>:<s2>".into(),
                ));
            }
            let parse = |s: &str| -> Result<usize> {
                s.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in pair spec")))
            };
            return Ok(PairSpec::Csl {
                n: parse(parts[0])?,
                s1: parse(parts[1])?,
                s2: parse(parts[2])?,
            });
        }
        if let Some(rest) = text.strip_prefix("cycles:") {
            let (a, b) = rest.split_once('/').ok_or_else(|| {
                Error::InvalidArgument("cycles pair spec needs cycles:<lens>/<lens>".into())
            })?;
            let parse_side = |s: &str| -> Result<Vec<usize>> {
                s.split(',')
                    .map(|x| {
                        x.parse().map_err(|_| {
                            Error::InvalidArgument(format!("bad cycle length {x:?}"))
                        })
                    })
                    .collect()
            };
            return Ok(PairSpec::CycleUnions {
                left: parse_side(a)?,
                right: parse_side(b)?,
            });
        }
        if let Some(rest) = text.strip_prefix("files:") {
            let (l, r) = rest.split_once(':').ok_or_else(|| {
                Error::InvalidArgument("files pair spec needs files:<left>:<right>".into())
            })?;
            return Ok(PairSpec::Files {
                left: PathBuf::from(l),
                right: PathBuf::from(r),
            });
        }
        Err(Error::InvalidArgument(format!(
            "unknown pair spec {text:?} (expected srg, csl:..., cycles:... or files:...)"
        )))
    }

    pub fn build(&self) -> Result<(Graph, Graph)> {
        match self {
            PairSpec::Srg => Ok(generators::generate_srg_pair()),
            PairSpec::Csl { n, s1, s2 } => Ok((
                generators::generate_csl(*n, *s1)?,
                generators::generate_csl(*n, *s2)?,
            )),
            PairSpec::CycleUnions { left, right } => Ok((
                generators::generate_cycle_union(left)?,
                generators::generate_cycle_union(right)?,
            )),
            PairSpec::Files { left, right } => Ok((read_graph_file(left)?, read_graph_file(right)?)),
        }
    }
}

fn read_graph_file(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    let record: GraphRecord = serde_json::from_str(text.trim())?;
    record.to_graph()
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleKReport {
    pub verdict: String,
    pub witness_count: usize,
    /// First few witness tuples, as node-id lists.
    pub witnesses: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub unmarked: String,
    pub k: BTreeMap<usize, OracleKReport>,
}

fn verdict(d: bool) -> String {
    if d {
        "distinguishable".into()
    } else {
        "indistinguishable".into()
    }
}

/// Distinguishability report for a pair: unmarked 1-WL verdict plus, per
/// tuple order up to `max_order`, the discriminative-tuple witnesses.
pub fn cmd_oracle(
    pair: &PairSpec,
    max_order: usize,
    budget: u64,
    max_witnesses: usize,
) -> Result<OracleReport> {
    let (a, b) = pair.build()?;
    let mut per_k = BTreeMap::new();
    for order in 1..=max_order {
        let witnesses = brute_force_discriminative(&a, &b, order, budget)?;
        per_k.insert(
            order,
            OracleKReport {
                verdict: verdict(!witnesses.is_empty()),
                witness_count: witnesses.len(),
                witnesses: witnesses
                    .iter()
                    .take(max_witnesses)
                    .map(|t| t.nodes().to_vec())
                    .collect(),
            },
        );
    }
    Ok(OracleReport {
        unmarked: verdict(distinguishable(&a, &b)),
        k: per_k,
    })
}

/// Default budget for oracle queries, re-exported for the CLI.
pub fn default_oracle_budget() -> u64 {
    DEFAULT_TUPLE_BUDGET
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gen_refuses_non_empty_dir_without_force() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("stale"), "x").unwrap();
        let spec = GenSpec::CyclePair;
        assert!(matches!(
            cmd_gen(&spec, dir.path(), false),
            Err(Error::InvalidArgument(_))
        ));
        let manifest = cmd_gen(&spec, dir.path(), true).unwrap();
        assert_eq!(manifest.count, 2);
    }

    #[test]
    fn gen_csl_counts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenSpec::Csl {
            n: 41,
            skips: crate::dataset::CSL_SKIPS.to_vec(),
            per_class: 15,
            seed: 0,
        };
        let manifest = cmd_gen(&spec, &dir.path().join("csl"), false).unwrap();
        assert_eq!(manifest.count, 150);
        assert_eq!(manifest.class_counts, vec![15; 10]);
    }

    #[test]
    fn pair_spec_parsing() {
        assert!(matches!(PairSpec::parse("srg"), Ok(PairSpec::Srg)));
        match PairSpec::parse("csl:8:2:3").unwrap() {
            PairSpec::Csl { n, s1, s2 } => {
                assert_eq!((n, s1, s2), (8, 2, 3));
            }
            _ => panic!(),
        }
        match PairSpec::parse("cycles:3,6/3,3,3").unwrap() {
            PairSpec::CycleUnions { left, right } => {
                assert_eq!(left, vec![3, 6]);
                assert_eq!(right, vec![3, 3, 3]);
            }
            _ => panic!(),
        }
        assert!(PairSpec::parse("nope").is_err());
    }

    #[test]
    fn oracle_on_identical_graphs_is_all_indistinguishable() {
        let report = cmd_oracle(
            &PairSpec::CycleUnions {
                left: vec![3, 6],
                right: vec![3, 6],
            },
            2,
            DEFAULT_TUPLE_BUDGET,
            5,
        )
        .unwrap();
        assert_eq!(report.unmarked, "indistinguishable");
        assert!(report.k.values().all(|k| k.verdict == "indistinguishable"));
    }

    #[test]
    fn oracle_on_figure_pair_finds_hexagon_witnesses() {
        let report = cmd_oracle(
            &PairSpec::CycleUnions {
                left: vec![3, 6],
                right: vec![3, 3, 3],
            },
            1,
            DEFAULT_TUPLE_BUDGET,
            10,
        )
        .unwrap();
        assert_eq!(report.unmarked, "indistinguishable");
        let k1 = &report.k[&1];
        assert_eq!(k1.verdict, "distinguishable");
        assert_eq!(k1.witness_count, 6);
        assert_eq!(
            k1.witnesses,
            vec![vec![3], vec![4], vec![5], vec![6], vec![7], vec![8]]
        );
    }

    #[test]
    fn bench_counts_match_example() {
        // 16-node graph, k=2, m=2, t=2: 256 enumeration encoder calls vs
        // 4 environment-encoding calls (and 4 Q-table calls, separately).
        let args = BenchArgs {
            dataset: None,
            graphs: 1,
            nodes: 16,
            edge_prob: 0.3,
            num_tuples: 2,
            order: 2,
            steps: 2,
            seed: 1,
            budget: 1_000_000,
            out: None,
        };
        let report = cmd_bench(&args).unwrap();
        assert!(!report.partial);
        let g = &report.graphs[0];
        assert_eq!(g.enumeration_calls, Some(256));
        assert_eq!(g.mag_env_calls, 4);
        assert_eq!(g.mag_qnet_calls, 4);
        assert_eq!(g.call_ratio, Some(64.0));
    }

    #[test]
    fn bench_partial_on_budget() {
        let args = BenchArgs {
            dataset: None,
            graphs: 1,
            nodes: 16,
            edge_prob: 0.3,
            num_tuples: 1,
            order: 2,
            steps: 1,
            seed: 1,
            budget: 10,
            out: None,
        };
        let report = cmd_bench(&args).unwrap();
        assert!(report.partial);
        assert!(report.graphs[0].enumeration_skipped);
        assert_eq!(report.graphs[0].mag_env_calls, 1);
    }
}
