// Temporary calibration probe; not part of the deliverable.
use std::time::Instant;

use magnn::config::{Paradigm, RunConfig};
use magnn::dataset::{build_csl_dataset, build_srg_dataset, CSL_SKIPS};
use magnn::train::{evaluate, ord_train, EvalOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("csl");
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let agent_steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    match which {
        "csl" => csl(epochs, agent_steps),
        "csl-env" => csl_env_only(epochs, lr),
        "csl-wl" => csl_wl_info(epochs),
        "srg" => srg(epochs, agent_steps),
        _ => eprintln!("unknown probe"),
    }
}

// Are `iters` WL rounds enough to separate marked CSL(41, s) classes?
fn csl_wl_info(iters: usize) {
    use magnn::graph::{MarkedGraph, NodeTuple};
    use magnn::wl::wl_refine;
    let iters = iters.max(1);
    let graphs: Vec<_> = CSL_SKIPS
        .iter()
        .map(|&s| magnn::generators::generate_csl(41, s).unwrap())
        .collect();
    // Single mark at node 0 (vertex-transitive, so placement is irrelevant);
    // second mark swept over all positions.
    for k in [1usize, 2] {
        let mut bad = 0;
        let mut total = 0;
        for i in 0..graphs.len() {
            for j in (i + 1)..graphs.len() {
                if k == 1 {
                    let t = NodeTuple::new(vec![0]).unwrap();
                    let a = wl_refine(&MarkedGraph::new(&graphs[i], &t).unwrap(), iters).unwrap();
                    let b = wl_refine(&MarkedGraph::new(&graphs[j], &t).unwrap(), iters).unwrap();
                    total += 1;
                    if a == b {
                        bad += 1;
                        println!("k=1 iters={iters}: skips {} vs {} collide", CSL_SKIPS[i], CSL_SKIPS[j]);
                    }
                } else {
                    // Every distance class of the second mark must separate
                    // from every distance class on the other graph.
                    let mut collide = false;
                    'outer: for d1 in 0..21 {
                        let t1 = NodeTuple::new(vec![0, d1]).unwrap();
                        let a =
                            wl_refine(&MarkedGraph::new(&graphs[i], &t1).unwrap(), iters).unwrap();
                        for d2 in 0..21 {
                            let t2 = NodeTuple::new(vec![0, d2]).unwrap();
                            let b = wl_refine(&MarkedGraph::new(&graphs[j], &t2).unwrap(), iters)
                                .unwrap();
                            if a == b {
                                collide = true;
                                println!(
                                    "k=2 iters={iters}: ({},d{d1}) vs ({},d{d2}) collide",
                                    CSL_SKIPS[i], CSL_SKIPS[j]
                                );
                                break 'outer;
                            }
                        }
                    }
                    total += 1;
                    if collide {
                        bad += 1;
                    }
                }
            }
        }
        println!("k={k} iters={iters}: {bad}/{total} class pairs with collisions");
    }
}

fn csl_env_only(epochs: usize, lr: f64) {
    use magnn::dataset::TaskKind;
    use magnn::model::PredictionModel;
    use magnn::train::{train_random_tuples, RandomTupleTraining};
    let ds = build_csl_dataset(41, &CSL_SKIPS, 15, 0).unwrap();
    let mut env = PredictionModel::new(
        TaskKind::GraphClass { num_classes: 10 },
        2,
        0,
        &magnn::model::EncoderConfig::default(),
        magnn::util::subseed(0, "env-init"),
    )
    .unwrap();
    let t0 = Instant::now();
    let report = train_random_tuples(
        &mut env,
        &ds,
        &RandomTupleTraining {
            num_tuples: 1,
            order: 2,
            epochs,
            batch_size: 64,
            learning_rate: lr,
            lr_decay_factor: 0.5,
            lr_decay_every: 250,
            seed: 0,
        },
    )
    .unwrap();
    println!("train {:?} ({} steps)", t0.elapsed(), report.optimizer_steps);
    for (i, l) in report.epoch_losses.iter().enumerate() {
        if i % 5 == 0 || i + 1 == report.epoch_losses.len() {
            println!("epoch {i}: loss {l:.4}");
        }
    }
    let opts = EvalOptions {
        repeats: 3,
        steps: 0,
        num_tuples: 1,
        seed: 1,
        split: None,
        curve: false,
        per_graph: false,
    };
    let rep = evaluate(&env, None, &ds, &opts).unwrap();
    println!("random-tuple accuracy: {:.4} (std {:.4})", rep.mean, rep.std);

    // Accuracy per mark distance class, on canonical (unpermuted) graphs.
    use magnn::graph::NodeTuple;
    for d in 0..=20usize {
        let mut correct = 0;
        for (class, &skip) in CSL_SKIPS.iter().enumerate() {
            let g = magnn::generators::generate_csl(41, skip).unwrap();
            let t = NodeTuple::new(vec![0, d]).unwrap();
            let pred = env.encode_set(&g, &[t]).unwrap();
            if pred.argmax_class() == class {
                correct += 1;
            }
        }
        print!("d{d}:{correct} ");
    }
    println!();
}

fn base_cfg() -> RunConfig {
    let mut cfg = RunConfig {
        dataset: "unused".into(),
        paradigm: Paradigm::Ord,
        seed: 0,
        ..RunConfig::default()
    };
    cfg.agent.m = 1;
    cfg.agent.k = 2;
    cfg.agent.t = 4;
    cfg.agent.buffer_capacity = 4000;
    cfg.agent.batch_size = 32;
    cfg.agent.sync_rate = 150;
    cfg
}

fn csl(epochs: usize, agent_steps: usize) {
    let t0 = Instant::now();
    let ds = build_csl_dataset(41, &CSL_SKIPS, 15, 0).unwrap();
    println!("dataset: {} graphs in {:?}", ds.len(), t0.elapsed());

    let mut cfg = base_cfg();
    cfg.train.epochs = epochs;
    cfg.train.agent_steps = agent_steps;
    cfg.train.batch_size = 64;

    let t1 = Instant::now();
    let (env, agent, report) = ord_train(&cfg, &ds, None).unwrap();
    println!(
        "ord train: {:?} (env epochs {}, agent steps {}), final env loss {:.4}",
        t1.elapsed(),
        report.env_epochs_run,
        report.agent_outer_steps,
        report.final_env_loss
    );
    let tail: Vec<f64> = report
        .action_rewards
        .iter()
        .rev()
        .take(500)
        .cloned()
        .collect();
    println!(
        "tail-500 reward mean: {:.4}",
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    );

    let t2 = Instant::now();
    let opts = EvalOptions {
        repeats: 3,
        steps: 4,
        num_tuples: 1,
        seed: 1,
        split: None,
        curve: true,
        per_graph: false,
    };
    let rep = evaluate(&env, Some(&agent), &ds, &opts).unwrap();
    println!(
        "eval: {:?}, mean {:.4} std {:.4} curve {:?}",
        t2.elapsed(),
        rep.mean,
        rep.std,
        rep.curve
    );
}

fn srg(epochs: usize, agent_steps: usize) {
    let ds = build_srg_dataset(40, 0).unwrap();
    let mut cfg = base_cfg();
    cfg.train.epochs = epochs;
    cfg.train.agent_steps = agent_steps;
    cfg.train.batch_size = 16;
    cfg.agent.sync_rate = 150;

    let t1 = Instant::now();
    let (env, agent, report) = ord_train(&cfg, &ds, None).unwrap();
    println!(
        "ord train: {:?}, final env loss {:.4}",
        t1.elapsed(),
        report.final_env_loss
    );
    let windows: Vec<f64> = report
        .action_rewards
        .windows(500.min(report.action_rewards.len()))
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    if let (Some(first), Some(last)) = (windows.first(), windows.last()) {
        println!("trailing-500 means: first {:.4} last {:.4}", first, last);
    }
    let third = windows.len() * 2 / 3;
    let min_final_third = windows[third..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!("min trailing-500 mean in final third: {:.4}", min_final_third);

    let opts = EvalOptions {
        repeats: 3,
        steps: 4,
        num_tuples: 1,
        seed: 1,
        split: None,
        curve: true,
        per_graph: false,
    };
    let rep = evaluate(&env, Some(&agent), &ds, &opts).unwrap();
    println!("eval mean {:.4} curve {:?}", rep.mean, rep.curve);
}
