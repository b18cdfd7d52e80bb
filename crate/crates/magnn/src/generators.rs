//! Synthetic graph generators: circular skip link graphs, cycle unions,
//! block super-graphs, the Shrikhande/Rook strongly-regular pair, and
//! Erdős–Rényi graphs. All generators are deterministic given their
//! parameters and seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Circular skip link graph: ring edges `{i, i+1 mod n}` plus skip edges
/// `{i, i+skip mod n}`. 4-regular and vertex-transitive.
pub fn generate_csl(n: usize, skip: usize) -> Result<Graph> {
    if n < 5 {
        return Err(Error::InvalidParameter(format!("csl needs n >= 5, got {n}")));
    }
    if skip < 2 {
        return Err(Error::InvalidParameter(format!(
            "csl skip must be >= 2 (skip {skip} would duplicate a ring edge)"
        )));
    }
    if 2 * skip >= n {
        return Err(Error::InvalidParameter(format!(
            "csl skip must satisfy skip < n/2, got skip {skip} for n {n}"
        )));
    }
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        edges.push((i, (i + skip) % n));
    }
    Graph::new(n, edges)
}

/// Disjoint union of simple cycles; 2-regular.
pub fn generate_cycle_union(cycle_lengths: &[usize]) -> Result<Graph> {
    if cycle_lengths.is_empty() {
        return Err(Error::InvalidParameter("need at least one cycle".into()));
    }
    if let Some(&bad) = cycle_lengths.iter().find(|&&l| l < 3) {
        return Err(Error::InvalidParameter(format!(
            "cycle length must be >= 3, got {bad}"
        )));
    }
    let n: usize = cycle_lengths.iter().sum();
    let mut edges = Vec::with_capacity(n);
    let mut offset = 0;
    for &len in cycle_lengths {
        for i in 0..len {
            edges.push((offset + i, offset + (i + 1) % len));
        }
        offset += len;
    }
    Graph::new(n, edges)
}

/// Block type of one component of a super-graph: A is CSL(8,2), B is CSL(8,3).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    A,
    B,
}

impl Block {
    pub fn inverse(self) -> Block {
        match self {
            Block::A => Block::B,
            Block::B => Block::A,
        }
    }

    fn skip(self) -> usize {
        match self {
            Block::A => 2,
            Block::B => 3,
        }
    }
}

/// Sign of a super-graph: positive realizes `S + S`, negative `S + S'` with
/// `S'` the element-wise inverse of `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Number of nodes in one super-graph block.
pub const BLOCK_SIZE: usize = 8;

/// Builds a super-graph of 4n CSL(8,·) blocks arranged on a ring, with
/// consecutive blocks fully bipartitely connected. A random sequence `S` of
/// n A-blocks and n B-blocks is drawn; the positive graph realizes the
/// sequence `S + S` (so block i and block i+2n always match), the negative
/// graph realizes `S + S'` (they never do). Returns the graph and the
/// realized block sequence.
pub fn generate_supergraph(
    n: usize,
    rng: &mut impl Rng,
    sign: Sign,
) -> Result<(Graph, Vec<Block>)> {
    if n < 1 {
        return Err(Error::InvalidParameter("supergraph needs n >= 1".into()));
    }
    let mut seq: Vec<Block> = std::iter::repeat(Block::A)
        .take(n)
        .chain(std::iter::repeat(Block::B).take(n))
        .collect();
    seq.shuffle(rng);
    let second: Vec<Block> = match sign {
        Sign::Positive => seq.clone(),
        Sign::Negative => seq.iter().map(|b| b.inverse()).collect(),
    };
    let blocks: Vec<Block> = seq.into_iter().chain(second).collect();

    let num_blocks = blocks.len(); // 4n
    let num_nodes = num_blocks * BLOCK_SIZE;
    let mut edges = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        let off = i * BLOCK_SIZE;
        let inner = generate_csl(BLOCK_SIZE, block.skip())?;
        edges.extend(inner.edges().iter().map(|&(u, v)| (off + u, off + v)));
        // Full bipartite connection to the next block on the ring.
        let next_off = ((i + 1) % num_blocks) * BLOCK_SIZE;
        for u in 0..BLOCK_SIZE {
            for v in 0..BLOCK_SIZE {
                edges.push((off + u, next_off + v));
            }
        }
    }
    Ok((Graph::new(num_nodes, edges)?, blocks))
}

/// Block index a node of a super-graph belongs to.
pub fn supergraph_block_of(node: usize) -> usize {
    node / BLOCK_SIZE
}

/// Whether two super-graph nodes sit on directly opposite blocks of a
/// 4n-block ring.
pub fn on_opposite_blocks(u: usize, v: usize, n: usize) -> bool {
    let num_blocks = 4 * n;
    let bu = supergraph_block_of(u) % num_blocks;
    let bv = supergraph_block_of(v) % num_blocks;
    (bu + 2 * n) % num_blocks == bv
}

/// The Shrikhande graph and the 4x4 Rook's graph, both SRG(16,6,2,2).
/// The pair is indistinguishable by 1-WL and by single-node marking, but
/// 2-tuple marking separates them.
pub fn generate_srg_pair() -> (Graph, Graph) {
    let id = |x: usize, y: usize| 4 * x + y;

    // Shrikhande: vertices Z4 x Z4, u ~ v iff u - v is in {±(1,0), ±(0,1), ±(1,1)}.
    let mut shrikhande = Vec::new();
    let diffs = [(1usize, 0usize), (0, 1), (1, 1)];
    for x in 0..4 {
        for y in 0..4 {
            for &(dx, dy) in &diffs {
                let u = id(x, y);
                let v = id((x + dx) % 4, (y + dy) % 4);
                shrikhande.push((u, v));
            }
        }
    }

    // Rook's graph: same row or same column.
    let mut rook = Vec::new();
    for x in 0..4 {
        for y in 0..4 {
            for y2 in (y + 1)..4 {
                rook.push((id(x, y), id(x, y2)));
            }
            for x2 in (x + 1)..4 {
                rook.push((id(x, y), id(x2, y)));
            }
        }
    }

    (
        Graph::new(16, shrikhande).expect("shrikhande construction"),
        Graph::new(16, rook).expect("rook construction"),
    )
}

/// Erdős–Rényi G(n, p).
pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).expect("ER construction is always simple")
}

/// Uniform random permutation of `0..n`.
pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force isomorphism test over all permutations; usable for n <= 8.
    /// Lives in test code only: it is the independent oracle against which
    /// generator claims are checked.
    fn isomorphic_brute_force(a: &Graph, b: &Graph) -> bool {
        if a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges() {
            return false;
        }
        let n = a.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            if a.edges()
                .iter()
                .all(|&(u, v)| b.has_edge(perm[u], perm[v]))
            {
                return true;
            }
            // next_permutation
            let mut i = n.wrapping_sub(2);
            while i != usize::MAX && perm[i] >= perm[i + 1] {
                i = i.wrapping_sub(1);
            }
            if i == usize::MAX {
                return false;
            }
            let mut j = n - 1;
            while perm[j] <= perm[i] {
                j -= 1;
            }
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
    }

    #[test]
    fn csl_8_2_shape() {
        let g = generate_csl(8, 2).unwrap();
        assert_eq!(g.num_nodes(), 8);
        assert_eq!(g.num_edges(), 16);
        assert!((0..8).all(|v| g.degree(v) == 4));
    }

    #[test]
    fn csl_8_3_not_isomorphic_to_8_2() {
        let a = generate_csl(8, 2).unwrap();
        let b = generate_csl(8, 3).unwrap();
        assert_eq!(b.num_edges(), 16);
        assert!((0..8).all(|v| b.degree(v) == 4));
        assert!(!isomorphic_brute_force(&a, &b));
        // Sanity for the oracle itself: every graph is isomorphic to a
        // relabeled copy of itself.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let perm = random_permutation(8, &mut rng);
        assert!(isomorphic_brute_force(&a, &a.permute(&perm).unwrap()));
    }

    #[test]
    fn csl_41_2_counts() {
        let g = generate_csl(41, 2).unwrap();
        assert_eq!(g.num_nodes(), 41);
        assert_eq!(g.num_edges(), 82);
    }

    #[test]
    fn csl_rejects_bad_parameters() {
        assert!(matches!(generate_csl(8, 1), Err(Error::InvalidParameter(_))));
        assert!(generate_csl(4, 2).is_err());
        assert!(generate_csl(8, 4).is_err());
    }

    #[test]
    fn csl_is_vertex_transitive_under_rotation() {
        let g = generate_csl(8, 2).unwrap();
        let rot: Vec<usize> = (0..8).map(|i| (i + 1) % 8).collect();
        let r = g.permute(&rot).unwrap();
        assert_eq!(r.edges(), g.edges());
    }

    #[test]
    fn cycle_union_shapes() {
        let b = generate_cycle_union(&[3, 3, 3]).unwrap();
        assert_eq!(b.num_nodes(), 9);
        assert!((0..9).all(|v| b.degree(v) == 2));
        let a = generate_cycle_union(&[3, 6]).unwrap();
        assert_eq!(a.num_nodes(), 9);
        assert!((0..9).all(|v| a.degree(v) == 2));
        let c = generate_cycle_union(&[4]).unwrap();
        assert_eq!(c.num_nodes(), 4);
        assert_eq!(c.num_edges(), 4);
        assert!(generate_cycle_union(&[2]).is_err());
    }

    #[test]
    fn supergraph_n1_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g, blocks) = generate_supergraph(1, &mut rng, Sign::Positive).unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!(g.num_nodes(), 32);
        // 4 blocks with 16 intra edges each, 4 inter-block bipartite bundles
        // of 64 edges each.
        assert_eq!(g.num_edges(), 4 * 16 + 4 * 64);
    }

    #[test]
    fn supergraph_sign_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..10 {
            let (_, pos) = generate_supergraph(3, &mut rng, Sign::Positive).unwrap();
            let (_, neg) = generate_supergraph(3, &mut rng, Sign::Negative).unwrap();
            assert_eq!(pos.len(), 12);
            for i in 0..12 {
                assert_eq!(pos[i], pos[(i + 6) % 12], "trial {trial} index {i}");
                assert_ne!(neg[i], neg[(i + 6) % 12], "trial {trial} index {i}");
            }
            // Balanced block types.
            assert_eq!(pos.iter().filter(|b| **b == Block::A).count(), 6);
        }
    }

    #[test]
    fn supergraph_is_deterministic_given_seed() {
        let (g1, b1) =
            generate_supergraph(2, &mut ChaCha8Rng::seed_from_u64(5), Sign::Negative).unwrap();
        let (g2, b2) =
            generate_supergraph(2, &mut ChaCha8Rng::seed_from_u64(5), Sign::Negative).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(b1, b2);
    }

    #[test]
    fn srg_pair_parameters() {
        let (sh, rook) = generate_srg_pair();
        for g in [&sh, &rook] {
            assert_eq!(g.num_nodes(), 16);
            assert_eq!(g.num_edges(), 48);
            assert!((0..16).all(|v| g.degree(v) == 6));
            // SRG(16,6,2,2): adjacent pairs share exactly 2 common neighbors,
            // non-adjacent pairs as well. Exhaustive check.
            for u in 0..16 {
                for v in (u + 1)..16 {
                    let common = g
                        .neighbors(u)
                        .iter()
                        .filter(|w| g.has_edge(v, **w))
                        .count();
                    assert_eq!(common, 2, "pair ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn erdos_renyi_is_reproducible() {
        let g1 = erdos_renyi(18, 0.18, &mut ChaCha8Rng::seed_from_u64(9));
        let g2 = erdos_renyi(18, 0.18, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(g1.edges(), g2.edges());
    }

    #[test]
    fn opposite_block_predicate() {
        // n=1: blocks 0..4, opposite pairs are (0,2) and (1,3).
        assert!(on_opposite_blocks(0, 2 * BLOCK_SIZE, 1));
        assert!(on_opposite_blocks(3 * BLOCK_SIZE, BLOCK_SIZE, 1));
        assert!(!on_opposite_blocks(0, BLOCK_SIZE, 1));
        assert!(!on_opposite_blocks(0, 7, 1));
    }
}
