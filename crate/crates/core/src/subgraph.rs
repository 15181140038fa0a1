//! h-hop enclosing subgraphs around a target pair, down-sampled to a
//! fixed node budget.

use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub hop: usize,
    pub max_nodes: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            hop: 1,
            max_nodes: 10,
        }
    }
}

/// An edge between two local node indices. The target edge carries no weight.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LocalEdge {
    a: usize,
    b: usize,
    weight: Option<f64>,
}

/// Induced weighted subgraph around a target pair.
///
/// Local index 0 is the first target, 1 the second. The target edge is kept
/// as a structural edge but its weight is never stored, so no accessor can
/// reveal it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnclosingSubgraph {
    nodes: Vec<usize>,
    edges: Vec<LocalEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl EnclosingSubgraph {
    /// Builds a subgraph from global node ids (targets first) and weighted
    /// edges between local indices. Any edge given between the two targets
    /// is discarded in favor of the masked target edge.
    pub fn new(nodes: Vec<usize>, known_edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::Contract("a subgraph needs both targets".into()));
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != n {
            return Err(Error::Contract("duplicate node in subgraph".into()));
        }
        let mut edges = vec![LocalEdge {
            a: 0,
            b: 1,
            weight: None,
        }];
        let mut pairs = std::collections::HashSet::new();
        pairs.insert((0, 1));
        for &(a, b, w) in known_edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Contract(format!("invalid local edge ({a}, {b})")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(w));
            }
            let (a, b) = (a.min(b), a.max(b));
            if pairs.insert((a, b)) {
                edges.push(LocalEdge {
                    a,
                    b,
                    weight: Some(w),
                });
            } else if (a, b) != (0, 1) {
                return Err(Error::Contract(format!("duplicate local edge ({a}, {b})")));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.a].push(e.b);
            adjacency[e.b].push(e.a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(EnclosingSubgraph {
            nodes,
            edges,
            adjacency,
        })
    }

    /// Global ids, targets first.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn target(&self) -> (usize, usize) {
        (self.nodes[0], self.nodes[1])
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.nodes.iter().position(|&g| g == global)
    }

    /// Structural edge count, target edge included.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// All structural edges as local pairs `(a, b)` with `a < b`; the target
    /// edge `(0, 1)` comes first.
    pub fn structural_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.a, e.b))
    }

    /// Edges whose weight is observed, as `(a, b, w)` over local indices.
    pub fn known_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges
            .iter()
            .filter_map(|e| e.weight.map(|w| (e.a, e.b, w)))
    }

    /// Observed weight between two local nodes; `None` when absent or masked.
    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let (a, b) = (a.min(b), a.max(b));
        self.edges
            .iter()
            .find(|e| e.a == a && e.b == b)
            .and_then(|e| e.weight)
    }

    pub fn is_target_edge(&self, a: usize, b: usize) -> bool {
        (a.min(b), a.max(b)) == (0, 1)
    }

    /// Structural neighbors of a local node, ascending.
    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }
}

/// Hop distances from `src`, explored no further than `limit` hops.
fn bounded_bfs(g: &WeightedGraph, src: usize, limit: usize) -> HashMap<usize, usize> {
    let mut dist = HashMap::new();
    dist.insert(src, 0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        if d == limit {
            continue;
        }
        for &(v, _) in g.neighbors(u) {
            dist.entry(v).or_insert_with(|| {
                queue.push_back(v);
                d + 1
            });
        }
    }
    dist
}

/// Nodes `v` with `min(d(v, v1), d(v, v2)) <= hop`, excluding the targets,
/// ascending by id.
pub fn enclosing_candidates(g: &WeightedGraph, v1: usize, v2: usize, hop: usize) -> Vec<usize> {
    let mut out: Vec<usize> = bounded_bfs(g, v1, hop)
        .into_keys()
        .chain(bounded_bfs(g, v2, hop).into_keys())
        .filter(|&v| v != v1 && v != v2)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Extracts the enclosing subgraph of `(v1, v2)` from the observed graph.
///
/// When more than `max_nodes` nodes qualify, `max_nodes - 2` non-target
/// nodes are drawn uniformly with `seed`; the targets are always kept. Edges
/// are induced from `observed`, whose weights must be the training weights.
/// The target edge is always present structurally with its weight masked.
pub fn extract_enclosing_subgraph(
    observed: &WeightedGraph,
    v1: usize,
    v2: usize,
    opts: &ExtractOptions,
    seed: u64,
) -> Result<EnclosingSubgraph> {
    for v in [v1, v2] {
        if !observed.contains_node(v) {
            return Err(Error::MissingNode(v));
        }
    }
    if v1 == v2 {
        return Err(Error::Contract("target endpoints must differ".into()));
    }
    if opts.max_nodes < 2 {
        return Err(Error::Config("max_nodes must be at least 2".into()));
    }

    let mut candidates = enclosing_candidates(observed, v1, v2, opts.hop);
    let budget = opts.max_nodes - 2;
    if candidates.len() > budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), budget)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        candidates = picked;
    }

    let mut nodes = Vec::with_capacity(candidates.len() + 2);
    nodes.push(v1);
    nodes.push(v2);
    nodes.extend(candidates);

    let mut known = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if (i, j) == (0, 1) {
                continue;
            }
            if let Some(w) = observed.weight(nodes[i], nodes[j]) {
                known.push((i, j, w));
            }
        }
    }
    EnclosingSubgraph::new(nodes, &known)
}
