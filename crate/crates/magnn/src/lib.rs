//! MAG-GNN: reinforcement-learning guided marked-subgraph graph neural
//! networks, with exact Weisfeiler-Lehman oracles and synthetic-graph
//! generators for verifying expressivity claims at desk scale.
//!
//! Instead of enumerating all `|V|^k` node-marked copies of a graph the way
//! full subgraph GNNs do, a Deep-Q agent iteratively relocates a small set of
//! marked node tuples toward discriminative placements; the prediction model
//! then encodes just those few marked copies. The crate contains:
//!
//! - [`graph`]: graphs, node tuples, the marking operation, permutations;
//! - [`generators`]: CSL graphs, cycle unions, block super-graphs, the
//!   Shrikhande/Rook pair, Erdős–Rényi graphs;
//! - [`wl`]: 1-WL refinement on plain and marked graphs, brute-force
//!   discriminative-tuple search, per-node cycle counting;
//! - [`nn`]: a dense reverse-mode kernel (GIN layers, pooling, losses, Adam);
//! - [`model`]: marked-graph encoders, tuple-set prediction, and the
//!   full-enumeration baseline;
//! - [`rl`]: the Q-network, replay buffer, rewards, and rollouts;
//! - [`train`]: the ORD/SIMUL/PRE training paradigms and evaluation;
//! - [`config`] / [`harness`]: run configuration and the CLI commands.

pub mod config;
pub mod dataset;
pub mod error;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod model;
pub mod nn;
pub mod rl;
pub mod train;
pub mod util;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{mark, Graph, MarkedGraph, NodeTuple};
