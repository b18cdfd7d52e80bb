//! `magnn` command-line interface.
//!
//! Subcommands: `gen` (datasets), `train` (ORD/SIMUL/PRE runs), `eval`
//! (evaluation reports), `bench` (MPNN-call accounting vs enumeration) and
//! `oracle` (exact WL distinguishability reports).
//!
//! Exit codes: 0 success, 1 usage/config errors, 2 runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magnn::config::{Overrides, Paradigm, RunConfig};
use magnn::dataset::{Split, CSL_SKIPS};
use magnn::error::Error;
use magnn::harness::{
    cmd_bench, cmd_eval, cmd_gen, cmd_oracle, cmd_train, default_oracle_budget, BenchArgs,
    EvalArgs, GenSpec, PairSpec,
};

#[derive(Parser)]
#[command(name = "magnn", version, about = "MAG-GNN training, oracles and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into a directory.
    Gen(GenCli),
    /// Train a model per the configured paradigm; prints the run directory.
    Train(TrainCli),
    /// Evaluate a finished run; prints a JSON report.
    Eval(EvalCli),
    /// Count MPNN invocations of MAG-GNN inference vs full enumeration.
    Bench(BenchCli),
    /// Exact WL distinguishability report for a graph pair.
    Oracle(OracleCli),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Csl,
    Supergraph,
    Cycles,
    Srg,
    CyclePair,
    ExpPairs,
}

#[derive(Args)]
struct GenCli {
    /// Dataset family.
    #[arg(value_enum)]
    family: FamilyArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSL node count, or super-graph size parameter (ring of 4n blocks).
    #[arg(long)]
    n: Option<usize>,
    /// CSL skip list (comma separated).
    #[arg(long, value_delimiter = ',')]
    skips: Option<Vec<usize>>,
    /// CSL instances per class.
    #[arg(long, default_value_t = 15)]
    per_class: usize,
    /// Super-graph positive instance count.
    #[arg(long, default_value_t = 100)]
    positive: usize,
    /// Super-graph negative instance count.
    #[arg(long, default_value_t = 100)]
    negative: usize,
    /// Cycle-task graph count.
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Cycle-task nodes per graph.
    #[arg(long, default_value_t = 18)]
    nodes: usize,
    /// Cycle-task edge probability.
    #[arg(long, default_value_t = 0.18)]
    edge_prob: f64,
    /// Cycle-task train fraction (rest is tagged test).
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// SRG permuted copies per graph.
    #[arg(long, default_value_t = 50)]
    copies: usize,
    /// 1-WL-equivalent pair count.
    #[arg(long, default_value_t = 50)]
    pairs: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParadigmArg {
    Ord,
    Simul,
    Pre,
}

impl From<ParadigmArg> for Paradigm {
    fn from(p: ParadigmArg) -> Self {
        match p {
            ParadigmArg::Ord => Paradigm::Ord,
            ParadigmArg::Simul => Paradigm::Simul,
            ParadigmArg::Pre => Paradigm::Pre,
        }
    }
}

#[derive(Args)]
struct TrainCli {
    /// TOML configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long = "data")]
    dataset: Option<String>,
    #[arg(long, value_enum)]
    paradigm: Option<ParadigmArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of node tuples m.
    #[arg(long)]
    m: Option<usize>,
    /// Tuple order k.
    #[arg(long)]
    k: Option<usize>,
    /// Agent search steps t.
    #[arg(long)]
    t: Option<usize>,
    /// Environment training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Agent outer steps.
    #[arg(long)]
    agent_steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_repeats: Option<usize>,
    /// Node-regression target column.
    #[arg(long)]
    target_column: Option<usize>,
    /// Agent checkpoint for the pre paradigm.
    #[arg(long)]
    pre_checkpoint: Option<String>,
    /// Run root directory (overrides MAGNN_RUN_ROOT and the config).
    #[arg(long)]
    run_root: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct EvalCli {
    /// Run directory produced by `train`.
    #[arg(long)]
    run: PathBuf,
    /// Dataset override (defaults to the run's configured dataset).
    #[arg(long = "data")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Agent steps at evaluation (defaults to the run's configured t).
    #[arg(long)]
    steps: Option<usize>,
    /// Restrict to one split.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the mean metric after each step 0..=t.
    #[arg(long)]
    curve: bool,
    /// Write per-graph outcomes to this CSV file.
    #[arg(long)]
    per_graph_csv: Option<PathBuf>,
    /// Report file (defaults to <run>/eval_report.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCli {
    /// Benchmark an existing dataset instead of generated graphs.
    #[arg(long = "data")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    graphs: usize,
    #[arg(long, default_value_t = 16)]
    nodes: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    /// Number of node tuples m.
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Tuple order k.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Search steps t.
    #[arg(long, default_value_t = 2)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumeration budget on |V|^k.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCli {
    /// Pair spec: srg | csl:<n>:<s1>:<s2> | cycles:<lens>/<lens> |
    /// files:<left.json>:<right.json>.
    #[arg(long)]
    pair: String,
    /// Maximum tuple order to test.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    budget: Option<u64>,
    /// Maximum witnesses listed per order.
    #[arg(long, default_value_t = 20)]
    max_witnesses: usize,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> magnn::Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let spec = match args.family {
                FamilyArg::Csl => GenSpec::Csl {
                    n: args.n.unwrap_or(41),
                    skips: args.skips.unwrap_or_else(|| CSL_SKIPS.to_vec()),
                    per_class: args.per_class,
                    seed: args.seed,
                },
                FamilyArg::Supergraph => GenSpec::Supergraph {
                    n: args.n.unwrap_or(2),
                    positive: args.positive,
                    negative: args.negative,
                    seed: args.seed,
                },
                FamilyArg::Cycles => GenSpec::Cycles {
                    count: args.count,
                    nodes: args.nodes,
                    edge_prob: args.edge_prob,
                    train_frac: args.train_frac,
                    seed: args.seed,
                },
                FamilyArg::Srg => GenSpec::Srg {
                    copies: args.copies,
                    seed: args.seed,
                },
                FamilyArg::CyclePair => GenSpec::CyclePair,
                FamilyArg::ExpPairs => GenSpec::ExpPairs {
                    pairs: args.pairs,
                    seed: args.seed,
                },
            };
            let manifest = cmd_gen(&spec, &args.out, args.force)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            Ok(())
        }
        Command::Train(args) => {
            let mut cfg = match &args.config {
                Some(path) => RunConfig::from_toml_str(&std::fs::read_to_string(path)?)?,
                None => RunConfig::default(),
            };
            cfg.apply(&Overrides {
                seed: args.seed,
                paradigm: args.paradigm.map(Into::into),
                dataset: args.dataset.clone(),
                run_root: args
                    .run_root
                    .as_ref()
                    .map(|p| p.display().to_string()),
                m: args.m,
                k: args.k,
                t: args.t,
                epochs: args.epochs,
                agent_steps: args.agent_steps,
                batch_size: args.batch_size,
                eval_repeats: args.eval_repeats,
                target_column: args.target_column,
                pre_checkpoint: args.pre_checkpoint.clone(),
            });
            let run_dir = cmd_train(&cfg, args.config.as_deref(), args.run_root.as_deref())?;
            println!("{}", run_dir.display());
            Ok(())
        }
        Command::Eval(args) => {
            let report = cmd_eval(&EvalArgs {
                run_dir: args.run,
                dataset: args.dataset,
                repeats: args.repeats,
                steps: args.steps,
                split: args.split.map(Into::into),
                seed: args.seed,
                curve: args.curve,
                per_graph_csv: args.per_graph_csv,
                out: args.out,
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Bench(args) => {
            let report = cmd_bench(&BenchArgs {
                dataset: args.dataset,
                graphs: args.graphs,
                nodes: args.nodes,
                edge_prob: args.edge_prob,
                num_tuples: args.m,
                order: args.k,
                steps: args.t,
                seed: args.seed,
                budget: args.budget,
                out: args.out,
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Oracle(args) => {
            let pair = PairSpec::parse(&args.pair)?;
            let report = cmd_oracle(
                &pair,
                args.k,
                args.budget.unwrap_or_else(default_oracle_budget),
                args.max_witnesses,
            )?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(out) = &args.out {
                std::fs::write(out, &text)?;
            }
            println!("{text}");
            Ok(())
        }
    }
}

fn exit_code_of(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::ConfigParse(_)
        | Error::InvalidArgument(_)
        | Error::InvalidParameter(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}
