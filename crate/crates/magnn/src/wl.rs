//! Exact, non-learned expressivity oracles.
//!
//! 1-WL color refinement on plain and marked graphs, histogram comparison,
//! brute-force discriminative-tuple search, per-node simple-cycle counting,
//! and exhaustive tuple score scans. These are the ground truth the learned
//! components are validated against.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::{all_tuples, Graph, MarkedGraph, NodeTuple};
use crate::util::Fnv64;

/// Default cap on `|V|^k` for exhaustive tuple enumeration.
pub const DEFAULT_TUPLE_BUDGET: u64 = 1_000_000;

/// Anything 1-WL refinement can run on: a graph plus initial node colors.
pub trait WlRefinable {
    fn wl_graph(&self) -> &Graph;
    /// Initial colors, hashed from the node feature rows. Featureless graphs
    /// start uniform; marked graphs fold the marking block into the hash.
    fn wl_initial_colors(&self) -> Vec<u64>;
}

const UNIFORM_COLOR: u64 = 0x57_4c_31; // arbitrary nonzero constant

impl WlRefinable for Graph {
    fn wl_graph(&self) -> &Graph {
        self
    }

    fn wl_initial_colors(&self) -> Vec<u64> {
        match self.features() {
            None => vec![UNIFORM_COLOR; self.num_nodes()],
            Some(f) => (0..self.num_nodes())
                .map(|v| {
                    let mut h = Fnv64::new();
                    for &x in f.row(v) {
                        h.write_f64(x);
                    }
                    h.finish()
                })
                .collect(),
        }
    }
}

impl WlRefinable for MarkedGraph<'_> {
    fn wl_graph(&self) -> &Graph {
        self.base()
    }

    fn wl_initial_colors(&self) -> Vec<u64> {
        let base = self.base();
        (0..base.num_nodes())
            .map(|v| {
                let mut h = Fnv64::new();
                if let Some(f) = base.features() {
                    for &x in f.row(v) {
                        h.write_f64(x);
                    }
                }
                for &x in self.marking().row(v) {
                    h.write_f64(x);
                }
                h.finish()
            })
            .collect()
    }
}

/// Stable refinement result. Colors are 64-bit hashes built only from the
/// initial colors and the multiset structure of the graph, so histograms are
/// comparable across graphs and invariant under node relabeling.
#[derive(Clone, Debug)]
pub struct ColorHistogram {
    counts: Vec<(u64, usize)>,
    node_colors: Vec<u64>,
    /// Distinct color count after each round, starting with the initial
    /// coloring. Refinement is monotone: this sequence never decreases.
    rounds: Vec<usize>,
}

impl PartialEq for ColorHistogram {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts
    }
}

impl Eq for ColorHistogram {}

impl ColorHistogram {
    /// Sorted `(color, count)` pairs; counts sum to the node count.
    pub fn counts(&self) -> &[(u64, usize)] {
        &self.counts
    }

    pub fn num_colors(&self) -> usize {
        self.counts.len()
    }

    pub fn node_colors(&self) -> &[u64] {
        &self.node_colors
    }

    pub fn rounds(&self) -> &[usize] {
        &self.rounds
    }

    /// Canonical hash of the histogram, relabeling-invariant.
    pub fn canonical_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        for &(color, count) in &self.counts {
            h.write_u64(color);
            h.write_usize(count);
        }
        h.finish()
    }

    fn from_colors(colors: Vec<u64>, rounds: Vec<usize>) -> Self {
        let mut counts: Vec<(u64, usize)> = Vec::new();
        let mut sorted = colors.clone();
        sorted.sort_unstable();
        for c in sorted {
            match counts.last_mut() {
                Some((color, n)) if *color == c => *n += 1,
                _ => counts.push((c, 1)),
            }
        }
        ColorHistogram {
            counts,
            node_colors: colors,
            rounds,
        }
    }
}

fn distinct(colors: &[u64]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}

/// Iterated 1-WL color refinement. Each round rehashes every node from its
/// own color and the sorted multiset of its neighbors' colors; stops once the
/// partition is stable or after `max_iters` rounds.
pub fn wl_refine<G: WlRefinable>(input: &G, max_iters: usize) -> Result<ColorHistogram> {
    if max_iters < 1 {
        return Err(Error::InvalidParameter("wl_refine needs max_iters >= 1".into()));
    }
    let graph = input.wl_graph();
    let n = graph.num_nodes();
    let mut colors = input.wl_initial_colors();
    let mut rounds = vec![distinct(&colors)];
    for _ in 0..max_iters {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let mut nb: Vec<u64> = graph.neighbors(v).iter().map(|&u| colors[u]).collect();
            nb.sort_unstable();
            let mut h = Fnv64::new();
            h.write_u64(colors[v]);
            for c in nb {
                h.write_u64(c);
            }
            next.push(h.finish());
        }
        let klasses = distinct(&next);
        let stable = klasses == *rounds.last().expect("nonempty");
        colors = next;
        rounds.push(klasses);
        if stable {
            break;
        }
    }
    Ok(ColorHistogram::from_colors(colors, rounds))
}

/// Refinement with the default iteration cap of `num_nodes`.
pub fn wl_histogram<G: WlRefinable>(input: &G) -> ColorHistogram {
    let n = input.wl_graph().num_nodes().max(1);
    wl_refine(input, n).expect("max_iters >= 1")
}

/// True iff the two refinement histograms differ, i.e. 1-WL separates the
/// inputs.
pub fn distinguishable<A: WlRefinable, B: WlRefinable>(a: &A, b: &B) -> bool {
    wl_histogram(a) != wl_histogram(b)
}

fn check_budget(num_nodes: usize, order: usize, budget: u64) -> Result<()> {
    let needed = (num_nodes as u128).pow(order as u32);
    if needed > budget as u128 {
        return Err(Error::Budget { needed, budget });
    }
    Ok(())
}

/// All tuples `v` in `V^k(g1)` whose marked-graph histogram differs from the
/// histogram of every marked copy of `g2`. An empty result means single
/// k-tuple marking (at 1-WL power) cannot separate `g1` from `g2`.
pub fn brute_force_discriminative(
    g1: &Graph,
    g2: &Graph,
    order: usize,
    budget: u64,
) -> Result<Vec<NodeTuple>> {
    if order < 1 {
        return Err(Error::InvalidParameter("tuple order must be >= 1".into()));
    }
    check_budget(g1.num_nodes(), order, budget)?;
    check_budget(g2.num_nodes(), order, budget)?;

    let mut seen: HashSet<Vec<(u64, usize)>> = HashSet::new();
    for u in all_tuples(g2.num_nodes(), order) {
        let marked = MarkedGraph::new(g2, &u)?;
        seen.insert(wl_histogram(&marked).counts().to_vec());
    }

    let mut witnesses = Vec::new();
    for v in all_tuples(g1.num_nodes(), order) {
        let marked = MarkedGraph::new(g1, &v)?;
        if !seen.contains(wl_histogram(&marked).counts()) {
            witnesses.push(v);
        }
    }
    Ok(witnesses)
}

/// Exact count of simple cycles of `length` through each node, by exhaustive
/// path enumeration with canonical deduplication (each cycle counted once per
/// node it contains). Intended for desk-scale graphs and lengths 3..=6.
pub fn count_cycles_per_node(graph: &Graph, length: usize) -> Result<Vec<usize>> {
    if !(3..=6).contains(&length) {
        return Err(Error::InvalidParameter(format!(
            "cycle length must be in 3..=6, got {length}"
        )));
    }
    let n = graph.num_nodes();
    let mut counts = vec![0usize; n];
    // Canonical form: the cycle's smallest node is the start, and the walk
    // direction is fixed by path[1] < path[length-1].
    let mut path = Vec::with_capacity(length);
    let mut on_path = vec![false; n];
    for start in 0..n {
        path.push(start);
        on_path[start] = true;
        dfs_cycles(graph, start, length, &mut path, &mut on_path, &mut counts);
        on_path[start] = false;
        path.pop();
    }
    Ok(counts)
}

fn dfs_cycles(
    graph: &Graph,
    start: usize,
    length: usize,
    path: &mut Vec<usize>,
    on_path: &mut Vec<bool>,
    counts: &mut Vec<usize>,
) {
    let last = *path.last().expect("path nonempty");
    if path.len() == length {
        if graph.has_edge(last, start) && path[1] < path[length - 1] {
            for &v in path.iter() {
                counts[v] += 1;
            }
        }
        return;
    }
    for &next in graph.neighbors(last) {
        if next <= start || on_path[next] {
            continue;
        }
        path.push(next);
        on_path[next] = true;
        dfs_cycles(graph, start, length, path, on_path, counts);
        on_path[next] = false;
        path.pop();
    }
}

/// Evaluates `scorer` on every k-tuple marking of `g` and returns the scores
/// sorted descending.
pub fn full_tuple_score_scan(
    g: &Graph,
    mut scorer: impl FnMut(&Graph, &NodeTuple) -> f64,
    order: usize,
    budget: u64,
) -> Result<Vec<f64>> {
    if order < 1 {
        return Err(Error::InvalidParameter("tuple order must be >= 1".into()));
    }
    check_budget(g.num_nodes(), order, budget)?;
    let mut scores: Vec<f64> = all_tuples(g.num_nodes(), order)
        .map(|t| scorer(g, &t))
        .collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{generate_csl, generate_cycle_union, generate_srg_pair};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_of_three_has_two_classes() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let h = wl_histogram(&g);
        assert_eq!(h.num_colors(), 2);
        let mut sizes: Vec<usize> = h.counts().iter().map(|&(_, c)| c).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2]); // middle node vs the two endpoints
    }

    #[test]
    fn two_regular_unions_are_uniform_and_equal() {
        let a = generate_cycle_union(&[3, 6]).unwrap();
        let b = generate_cycle_union(&[3, 3, 3]).unwrap();
        let ha = wl_histogram(&a);
        let hb = wl_histogram(&b);
        assert_eq!(ha.num_colors(), 1);
        assert_eq!(ha, hb);
        assert!(!distinguishable(&a, &b));
    }

    #[test]
    fn hexagon_mark_separates_the_unions() {
        // (3,6) nodes 0..3 form the triangle, 3..9 the hexagon.
        let a = generate_cycle_union(&[3, 6]).unwrap();
        let b = generate_cycle_union(&[3, 3, 3]).unwrap();
        let hex = NodeTuple::new(vec![4]).unwrap();
        let ma = MarkedGraph::new(&a, &hex).unwrap();
        for v in 0..9 {
            let mb = MarkedGraph::new(&b, &NodeTuple::new(vec![v]).unwrap()).unwrap();
            assert!(distinguishable(&ma, &mb));
        }
    }

    #[test]
    fn identical_graphs_are_indistinguishable() {
        let g = generate_csl(8, 2).unwrap();
        assert!(!distinguishable(&g, &g));
    }

    #[test]
    fn csl_pair_needs_marking() {
        let a = generate_csl(8, 2).unwrap();
        let b = generate_csl(8, 3).unwrap();
        assert!(!distinguishable(&a, &b));
        let ta = NodeTuple::new(vec![0]).unwrap();
        let ma = MarkedGraph::new(&a, &ta).unwrap();
        let mb = MarkedGraph::new(&b, &ta).unwrap();
        assert!(distinguishable(&ma, &mb));
    }

    #[test]
    fn discriminative_tuples_of_the_unions_are_the_hexagon() {
        let a = generate_cycle_union(&[3, 6]).unwrap();
        let b = generate_cycle_union(&[3, 3, 3]).unwrap();
        let w = brute_force_discriminative(&a, &b, 1, DEFAULT_TUPLE_BUDGET).unwrap();
        let nodes: Vec<usize> = w.iter().map(|t| t.nodes()[0]).collect();
        assert_eq!(nodes, vec![3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn graph_against_itself_has_no_witnesses() {
        let g = generate_csl(8, 3).unwrap();
        assert!(brute_force_discriminative(&g, &g, 1, DEFAULT_TUPLE_BUDGET)
            .unwrap()
            .is_empty());
        let a = generate_cycle_union(&[3, 4]).unwrap();
        assert!(brute_force_discriminative(&a, &a, 2, DEFAULT_TUPLE_BUDGET)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn srg_pair_needs_order_two() {
        let (sh, rook) = generate_srg_pair();
        let k1 = brute_force_discriminative(&sh, &rook, 1, DEFAULT_TUPLE_BUDGET).unwrap();
        assert!(k1.is_empty());
        let k2 = brute_force_discriminative(&sh, &rook, 2, DEFAULT_TUPLE_BUDGET).unwrap();
        assert!(!k2.is_empty());
        // The witness set includes 2-distanced pairs (distinct, non-adjacent).
        assert!(k2.iter().any(|t| {
            let (u, v) = (t.nodes()[0], t.nodes()[1]);
            u != v && !sh.has_edge(u, v)
        }));
    }

    #[test]
    fn budget_is_enforced() {
        let g = generate_csl(8, 2).unwrap();
        match brute_force_discriminative(&g, &g, 2, 10) {
            Err(Error::Budget { needed, budget }) => {
                assert_eq!(needed, 64);
                assert_eq!(budget, 10);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
        assert!(full_tuple_score_scan(&g, |_, _| 0.0, 3, 100).is_err());
    }

    #[test]
    fn cycle_counts_on_small_graphs() {
        let tri = generate_cycle_union(&[3]).unwrap();
        assert_eq!(count_cycles_per_node(&tri, 3).unwrap(), vec![1, 1, 1]);

        let hex = generate_cycle_union(&[6]).unwrap();
        for len in 3..=5 {
            assert_eq!(count_cycles_per_node(&hex, len).unwrap(), vec![0; 6]);
        }
        assert_eq!(count_cycles_per_node(&hex, 6).unwrap(), vec![1; 6]);

        let k4 = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert_eq!(count_cycles_per_node(&k4, 3).unwrap(), vec![3; 4]);
        assert_eq!(count_cycles_per_node(&k4, 4).unwrap(), vec![3; 4]);

        assert!(count_cycles_per_node(&k4, 7).is_err());
    }

    /// Independent triangle count: half the number of closed 3-walks at v,
    /// computed from common neighborhoods rather than path enumeration.
    fn triangles_by_trace(g: &Graph, v: usize) -> usize {
        let mut walks = 0;
        for &u in g.neighbors(v) {
            walks += g.neighbors(u).iter().filter(|w| g.has_edge(**w, v)).count();
        }
        walks / 2
    }

    #[test]
    fn triangle_counts_match_trace_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = crate::generators::erdos_renyi(12, 0.3, &mut rng);
            let counts = count_cycles_per_node(&g, 3).unwrap();
            for v in 0..12 {
                assert_eq!(counts[v], triangles_by_trace(&g, v));
            }
        }
    }

    #[test]
    fn score_scan_orders_descending() {
        let g = generate_cycle_union(&[3, 6]).unwrap();
        let flat = full_tuple_score_scan(&g, |_, _| 0.5, 1, 100).unwrap();
        assert!(flat.iter().all(|&s| s == 0.5));

        let scores = full_tuple_score_scan(
            &g,
            |_, t| if t.nodes()[0] >= 3 { 1.0 } else { 0.0 },
            1,
            100,
        )
        .unwrap();
        assert_eq!(scores, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn refine_rejects_zero_iters() {
        let g = generate_csl(8, 2).unwrap();
        assert!(wl_refine(&g, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Permutation invariance of the histogram, and monotone refinement.
        #[test]
        fn refinement_is_permutation_invariant(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = crate::generators::erdos_renyi(10, 0.3, &mut rng);
            let perm = crate::generators::random_permutation(10, &mut rng);
            let pg = g.permute(&perm).unwrap();
            let h = wl_histogram(&g);
            let hp = wl_histogram(&pg);
            prop_assert_eq!(h.counts(), hp.counts());
            prop_assert!(h.rounds().windows(2).all(|w| w[0] <= w[1]));

            // Marked variant.
            let t = NodeTuple::sample_uniform(&g, 2, &mut rng);
            let mg = MarkedGraph::new(&g, &t).unwrap();
            let pmg = MarkedGraph::new(&pg, &t.permute(&perm)).unwrap();
            let hm = wl_histogram(&mg);
            let hpm = wl_histogram(&pmg);
            prop_assert_eq!(hm.counts(), hpm.counts());
        }

        #[test]
        fn distinguishable_is_symmetric(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = crate::generators::erdos_renyi(8, 0.3, &mut rng);
            let b = crate::generators::erdos_renyi(8, 0.3, &mut rng);
            prop_assert_eq!(distinguishable(&a, &b), distinguishable(&b, &a));
        }
    }
}
