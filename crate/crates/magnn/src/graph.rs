//! Undirected simple graphs, ordered node tuples, and node-tuple marking.
//!
//! A [`MarkedGraph`] is a graph together with an ordered k-tuple of nodes
//! whose positions are one-hot encoded into k extra feature columns. Marking
//! breaks the symmetries that bound plain message passing, which is the
//! mechanism everything else in this crate builds on.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::matrix::DenseMatrix;

/// Default value written at a marked position.
pub const MARK_ON: f64 = 1.0;
/// Default value written everywhere else in the marking block.
pub const MARK_OFF: f64 = 0.0;

/// Undirected simple graph with optional dense node features.
///
/// Immutable after construction; adjacency is shared behind an `Arc` so that
/// clones (dataset instances, replay-buffer snapshots) stay cheap.
#[derive(Clone, Debug)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adj: Arc<Vec<Vec<usize>>>,
    features: Option<DenseMatrix>,
}

impl Graph {
    /// Builds a graph from an edge list. Rejects self-loops, duplicate edges
    /// and out-of-range endpoints.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u},{v}) out of range for {num_nodes} nodes"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        let mut adj = vec![Vec::new(); num_nodes];
        for &(u, v) in &canon {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            num_nodes,
            edges: canon,
            adj: Arc::new(adj),
            features: None,
        })
    }

    pub fn with_features(mut self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes {
            return Err(Error::Shape(format!(
                "feature rows {} != num nodes {}",
                features.rows(),
                self.num_nodes
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list: `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn adjacency(&self) -> &Arc<Vec<Vec<usize>>> {
        &self.adj
    }

    pub fn features(&self) -> Option<&DenseMatrix> {
        self.features.as_ref()
    }

    /// Feature columns carried by the graph itself (0 when featureless).
    pub fn raw_feature_dim(&self) -> usize {
        self.features.as_ref().map(|f| f.cols()).unwrap_or(0)
    }

    /// Encoder input for the unmarked graph: the node features, or a constant
    /// ones column for featureless graphs.
    pub fn plain_input(&self) -> DenseMatrix {
        match &self.features {
            Some(f) => f.clone(),
            None => DenseMatrix::from_fn(self.num_nodes, 1, |_, _| 1.0),
        }
    }

    pub fn plain_input_dim(&self) -> usize {
        self.raw_feature_dim().max(1)
    }

    /// Relabels nodes by `perm`: edge `{u,v}` maps to `{perm[u],perm[v]}` and
    /// feature rows move with their nodes.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(Error::InvalidPermutation(format!(
                "permutation length {} != num nodes {}",
                perm.len(),
                self.num_nodes
            )));
        }
        let mut seen = vec![false; self.num_nodes];
        for &p in perm {
            if p >= self.num_nodes || seen[p] {
                return Err(Error::InvalidPermutation("not a bijection on node ids".into()));
            }
            seen[p] = true;
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        let mut g = Graph::new(self.num_nodes, edges)?;
        if let Some(f) = &self.features {
            let mut pf = DenseMatrix::zeros(f.rows(), f.cols());
            for v in 0..self.num_nodes {
                pf.row_mut(perm[v]).copy_from_slice(f.row(v));
            }
            g = g.with_features(pf)?;
        }
        Ok(g)
    }
}

/// Ordered k-tuple of node ids; repeats are permitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeTuple {
    nodes: Vec<usize>,
}

impl NodeTuple {
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTuple("tuple order must be at least 1".into()));
        }
        Ok(NodeTuple { nodes })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn validate_for(&self, graph: &Graph) -> Result<()> {
        for &v in &self.nodes {
            if v >= graph.num_nodes() {
                return Err(Error::InvalidTuple(format!(
                    "node id {v} out of range for graph with {} nodes",
                    graph.num_nodes()
                )));
            }
        }
        Ok(())
    }

    /// Copy of the tuple with `position` replaced by `node`.
    pub fn replace(&self, position: usize, node: usize) -> Result<NodeTuple> {
        if position >= self.nodes.len() {
            return Err(Error::InvalidTuple(format!(
                "position {position} out of range for order {}",
                self.nodes.len()
            )));
        }
        let mut nodes = self.nodes.clone();
        nodes[position] = node;
        Ok(NodeTuple { nodes })
    }

    /// Uniform sample from V^k, with replacement.
    pub fn sample_uniform(graph: &Graph, order: usize, rng: &mut impl rand::Rng) -> NodeTuple {
        assert!(order >= 1, "tuple order must be at least 1");
        let nodes = (0..order)
            .map(|_| rng.gen_range(0..graph.num_nodes()))
            .collect();
        NodeTuple { nodes }
    }

    /// Tuple with ids mapped through `perm` (already validated elsewhere).
    pub fn permute(&self, perm: &[usize]) -> NodeTuple {
        NodeTuple {
            nodes: self.nodes.iter().map(|&v| perm[v]).collect(),
        }
    }
}

/// Iterator over all of V^k in lexicographic order.
pub fn all_tuples(num_nodes: usize, order: usize) -> impl Iterator<Item = NodeTuple> {
    assert!(order >= 1);
    let total = (num_nodes as u128).pow(order as u32);
    (0..total).map(move |mut idx| {
        let mut nodes = vec![0usize; order];
        for slot in (0..order).rev() {
            nodes[slot] = (idx % num_nodes as u128) as usize;
            idx /= num_nodes as u128;
        }
        NodeTuple { nodes }
    })
}

/// A graph plus a node tuple, with the tuple one-hot encoded into a
/// `num_nodes x k` marking block appended to the node features.
#[derive(Clone, Debug)]
pub struct MarkedGraph<'a> {
    base: &'a Graph,
    tuple: NodeTuple,
    marking: DenseMatrix,
}

/// Marks `tuple` on `graph`: entry `(l, j)` of the marking block is `on`
/// exactly when node `l` sits at tuple position `j`, and `off` otherwise.
/// The block is appended to (never replaces) existing node features.
pub fn mark<'a>(graph: &'a Graph, tuple: &NodeTuple, on: f64, off: f64) -> Result<MarkedGraph<'a>> {
    tuple.validate_for(graph)?;
    let k = tuple.order();
    let mut marking = DenseMatrix::from_fn(graph.num_nodes(), k, |_, _| off);
    for (j, &v) in tuple.nodes().iter().enumerate() {
        marking.set(v, j, on);
    }
    Ok(MarkedGraph {
        base: graph,
        tuple: tuple.clone(),
        marking,
    })
}

impl<'a> MarkedGraph<'a> {
    /// Marking with the default values `1.0` / `0.0`.
    pub fn new(graph: &'a Graph, tuple: &NodeTuple) -> Result<Self> {
        mark(graph, tuple, MARK_ON, MARK_OFF)
    }

    pub fn base(&self) -> &Graph {
        self.base
    }

    pub fn tuple(&self) -> &NodeTuple {
        &self.tuple
    }

    pub fn marking(&self) -> &DenseMatrix {
        &self.marking
    }

    /// Encoder input: base features (when present) with the marking block
    /// concatenated column-wise.
    pub fn input_features(&self) -> DenseMatrix {
        match self.base.features() {
            Some(f) => f.concat_cols(&self.marking),
            None => self.marking.clone(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.base.raw_feature_dim() + self.tuple.order()
    }
}

/// Input dimension an encoder must have to consume `order`-marked copies of
/// graphs whose own features have `raw_feature_dim` columns.
pub fn marked_input_dim(raw_feature_dim: usize, order: usize) -> usize {
    raw_feature_dim + order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        assert!(matches!(
            Graph::new(3, [(0, 0)]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            Graph::new(3, [(0, 1), (1, 0)]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(Graph::new(2, [(0, 3)]).is_err());
    }

    #[test]
    fn mark_matches_case_split() {
        // 3-node graph, tuple (2,0): node0=(0,1), node1=(0,0), node2=(1,0).
        let g = triangle();
        let t = NodeTuple::new(vec![2, 0]).unwrap();
        let m = mark(&g, &t, 1.0, 0.0).unwrap();
        assert_eq!(m.marking().row(0), &[0.0, 1.0]);
        assert_eq!(m.marking().row(1), &[0.0, 0.0]);
        assert_eq!(m.marking().row(2), &[1.0, 0.0]);
    }

    #[test]
    fn repeated_node_marks_both_columns() {
        let g = triangle();
        let t = NodeTuple::new(vec![1, 1]).unwrap();
        let m = MarkedGraph::new(&g, &t).unwrap();
        assert_eq!(m.marking().row(1), &[1.0, 1.0]);
        assert_eq!(m.marking().row(0), &[0.0, 0.0]);
        assert_eq!(m.marking().row(2), &[0.0, 0.0]);
    }

    #[test]
    fn single_mark_on_two_node_graph() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let t = NodeTuple::new(vec![0]).unwrap();
        let m = MarkedGraph::new(&g, &t).unwrap();
        assert_eq!(m.marking().row(0), &[1.0]);
        assert_eq!(m.marking().row(1), &[0.0]);
    }

    #[test]
    fn mark_rejects_out_of_range() {
        let g = triangle();
        let t = NodeTuple::new(vec![5]).unwrap();
        assert!(matches!(
            MarkedGraph::new(&g, &t),
            Err(Error::InvalidTuple(_))
        ));
    }

    #[test]
    fn marking_appends_to_features() {
        let g = triangle()
            .with_features(DenseMatrix::from_rows(&[vec![7.0], vec![8.0], vec![9.0]]).unwrap())
            .unwrap();
        let t = NodeTuple::new(vec![1]).unwrap();
        let m = MarkedGraph::new(&g, &t).unwrap();
        let x = m.input_features();
        assert_eq!(x.row(1), &[8.0, 1.0]);
        assert_eq!(x.row(0), &[7.0, 0.0]);
        assert_eq!(m.input_dim(), 2);
    }

    #[test]
    fn permute_identity_and_triangle() {
        let g = triangle();
        let id = g.permute(&[0, 1, 2]).unwrap();
        assert_eq!(id.edges(), g.edges());
        let rot = g.permute(&[1, 2, 0]).unwrap();
        assert_eq!(rot.edges(), g.edges()); // a triangle maps to a triangle
    }

    #[test]
    fn permute_rejects_non_bijection() {
        let g = triangle();
        assert!(matches!(
            g.permute(&[0, 0, 1]),
            Err(Error::InvalidPermutation(_))
        ));
        assert!(g.permute(&[0, 1]).is_err());
    }

    #[test]
    fn mark_commutes_with_permutation() {
        // mark(permute(G,pi), pi(v)) == row-permutation by pi of mark(G, v)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        for _ in 0..20 {
            let t = NodeTuple::sample_uniform(&g, 2, &mut rng);
            let perm = crate::generators::random_permutation(5, &mut rng);
            let pg = g.permute(&perm).unwrap();
            let pt = t.permute(&perm);
            let marked_after = MarkedGraph::new(&pg, &pt).unwrap();
            let marked_before = MarkedGraph::new(&g, &t).unwrap();
            for v in 0..5 {
                assert_eq!(marked_after.marking().row(perm[v]), marked_before.marking().row(v));
            }
        }
    }

    #[test]
    fn all_tuples_is_lexicographic_and_complete() {
        let ts: Vec<_> = all_tuples(3, 2).collect();
        assert_eq!(ts.len(), 9);
        assert_eq!(ts[0].nodes(), &[0, 0]);
        assert_eq!(ts[1].nodes(), &[0, 1]);
        assert_eq!(ts[8].nodes(), &[2, 2]);
    }
}
