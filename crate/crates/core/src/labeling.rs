//! Node ordering for enclosing subgraphs and the ordered adjacency features.
//!
//! The weighted Weisfeiler-Lehman ordering seeds every non-target node with a
//! label derived from its summed shortest-path distance to the two targets,
//! then repeatedly picks the node with the smallest signature (own label
//! followed by its neighbors' labels, ascending). Each picked node's label is
//! overwritten by its 1-based position so later signatures see it. The
//! targets always hold positions 0 and 1 and keep label 0.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subgraph::EnclosingSubgraph;

/// How an edge weight is turned into a path length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    #[default]
    Weight,
    InverseWeight,
}

impl DistanceMode {
    fn length(self, w: f64) -> f64 {
        match self {
            DistanceMode::Weight => w,
            DistanceMode::InverseWeight => 1.0 / w,
        }
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight" => Ok(DistanceMode::Weight),
            "inverse-weight" => Ok(DistanceMode::InverseWeight),
            other => Err(Error::Config(format!("unknown distance mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelingMethod {
    WeightedWl,
    Random,
}

/// A permutation of a subgraph's local node indices; position is the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeOrdering {
    order: Vec<usize>,
    method: LabelingMethod,
}

impl NodeOrdering {
    /// Wraps an explicit order, checking it is a permutation with the
    /// targets first.
    pub fn new(order: Vec<usize>, method: LabelingMethod) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &v in &order {
            if v >= order.len() || std::mem::replace(&mut seen[v], true) {
                return Err(Error::Contract("ordering is not a permutation".into()));
            }
        }
        if order.len() < 2 || order[0] != 0 || order[1] != 1 {
            return Err(Error::Contract("targets must occupy positions 0 and 1".into()));
        }
        Ok(NodeOrdering { order, method })
    }

    /// Local node indices in label order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn method(&self) -> LabelingMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `positions()[local] = label position`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &v) in self.order.iter().enumerate() {
            pos[v] = p;
        }
        pos
    }

    /// Global node id to position, for fixture dumps.
    pub fn to_json(&self, sg: &EnclosingSubgraph) -> Result<String> {
        let map: BTreeMap<usize, usize> = self
            .order
            .iter()
            .enumerate()
            .map(|(p, &v)| (sg.nodes()[v], p))
            .collect();
        Ok(serde_json::to_string(&map)?)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path lengths over the observed edges of `sg`,
/// indexed by local node. The masked target edge is never traversed.
/// Unreachable nodes get `f64::INFINITY`.
pub fn weighted_shortest_paths(sg: &EnclosingSubgraph, src: usize, mode: DistanceMode) -> Vec<f64> {
    let n = sg.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (a, b, w) in sg.known_edges() {
        let len = mode.length(w);
        adj[a].push((b, len));
        adj[b].push((a, len));
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::from([Frontier { cost: 0.0, node: src }]);
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, len) in &adj[node] {
            let c = cost + len;
            if c < dist[next] {
                dist[next] = c;
                heap.push(Frontier { cost: c, node: next });
            }
        }
    }
    dist
}

fn same_distance(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Rank-encodes distances: distinct finite values ascending get 1, 2, ...;
/// every infinite value shares the largest rank + 1.
pub fn rank_encode(distances: &[f64]) -> Vec<u32> {
    let mut finite: Vec<f64> = distances.iter().copied().filter(|d| d.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = Vec::new();
    for d in finite {
        if levels.last().is_none_or(|&l| !same_distance(l, d)) {
            levels.push(d);
        }
    }
    distances
        .iter()
        .map(|&d| {
            if d.is_finite() {
                // Closest level; values were grouped with the same tolerance.
                let i = levels.partition_point(|&l| l < d && !same_distance(l, d));
                i as u32 + 1
            } else {
                levels.len() as u32 + 1
            }
        })
        .collect()
}

/// Summed distance `d(v) = d(v, v1) + d(v, v2)` for every local node.
pub fn target_distance_sums(sg: &EnclosingSubgraph, mode: DistanceMode) -> Vec<f64> {
    let from_first = weighted_shortest_paths(sg, 0, mode);
    let from_second = weighted_shortest_paths(sg, 1, mode);
    from_first
        .iter()
        .zip(&from_second)
        .map(|(a, b)| a + b)
        .collect()
}

/// Weighted Weisfeiler-Lehman ordering. Deterministic.
///
/// Signature ties are broken by smaller summed distance, then by local index.
pub fn order_nodes_wwl(sg: &EnclosingSubgraph, mode: DistanceMode) -> NodeOrdering {
    let n = sg.len();
    let dsum = target_distance_sums(sg, mode);
    let mut labels = vec![0u32; n];
    if n > 2 {
        let ranks = rank_encode(&dsum[2..]);
        labels[2..].copy_from_slice(&ranks);
    }

    let mut order = vec![0, 1];
    let mut placed = vec![false; n];
    placed[0] = true;
    placed[1] = true;

    let signature = |v: usize, labels: &[u32]| -> Vec<u32> {
        let mut sig = Vec::with_capacity(sg.neighbors(v).len() + 1);
        sig.push(labels[v]);
        let mut around: Vec<u32> = sg.neighbors(v).iter().map(|&u| labels[u]).collect();
        around.sort_unstable();
        sig.extend(around);
        sig
    };

    while order.len() < n {
        let mut best: Option<(Vec<u32>, usize)> = None;
        for v in (0..n).filter(|&v| !placed[v]) {
            let sig = signature(v, &labels);
            let better = match &best {
                None => true,
                Some((bsig, b)) => sig
                    .cmp(bsig)
                    .then_with(|| dsum[v].total_cmp(&dsum[*b]))
                    .then_with(|| v.cmp(b))
                    .is_lt(),
            };
            if better {
                best = Some((sig, v));
            }
        }
        let (_, v) = best.expect("an unplaced node remains");
        placed[v] = true;
        order.push(v);
        labels[v] = order.len() as u32;
    }

    NodeOrdering {
        order,
        method: LabelingMethod::WeightedWl,
    }
}

/// Targets first, the rest uniformly shuffled by `seed`.
pub fn order_nodes_random(sg: &EnclosingSubgraph, seed: u64) -> NodeOrdering {
    let mut rest: Vec<usize> = (2..sg.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest.shuffle(&mut rng);
    let mut order = vec![0, 1];
    order.extend(rest);
    NodeOrdering {
        order,
        method: LabelingMethod::Random,
    }
}

/// Adjacency matrix in label order, zero-padded to `max_nodes`, with the
/// target weight replaced by −1.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedFeatureMatrix {
    matrix: Array2<f64>,
    n_real: usize,
}

/// Value written in place of the hidden target weight.
pub const MASK: f64 = -1.0;

impl OrderedFeatureMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn max_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn row(&self, position: usize) -> ndarray::ArrayView1<'_, f64> {
        self.matrix.row(position)
    }
}

pub fn build_feature_matrix(
    sg: &EnclosingSubgraph,
    ord: &NodeOrdering,
    max_nodes: usize,
) -> Result<OrderedFeatureMatrix> {
    let n = sg.len();
    if ord.len() != n {
        return Err(Error::Contract(format!(
            "ordering covers {} nodes, subgraph has {n}",
            ord.len()
        )));
    }
    if n > max_nodes {
        return Err(Error::Contract(format!(
            "subgraph has {n} nodes, more than max_nodes = {max_nodes}"
        )));
    }
    let pos = ord.positions();
    let mut matrix = Array2::zeros((max_nodes, max_nodes));
    for (a, b, w) in sg.known_edges() {
        matrix[[pos[a], pos[b]]] = w;
        matrix[[pos[b], pos[a]]] = w;
    }
    matrix[[0, 1]] = MASK;
    matrix[[1, 0]] = MASK;
    Ok(OrderedFeatureMatrix { matrix, n_real: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn sg(n: usize, edges: &[(usize, usize, f64)]) -> EnclosingSubgraph {
        EnclosingSubgraph::new((100..100 + n).collect(), edges).unwrap()
    }

    #[test]
    fn path_distance() {
        // a=2, b=3, c=4; targets are isolated from the path.
        let g = sg(5, &[(2, 3, 0.3), (3, 4, 0.4)]);
        let d = weighted_shortest_paths(&g, 2, DistanceMode::Weight);
        assert_relative_eq!(d[4], 0.7, epsilon = 1e-15);
        assert_eq!(d[2], 0.0);
        assert!(d[0].is_infinite());
        let inv = weighted_shortest_paths(&g, 2, DistanceMode::InverseWeight);
        assert_relative_eq!(inv[4], 1.0 / 0.3 + 1.0 / 0.4, epsilon = 1e-12);
    }

    #[test]
    fn target_edge_is_not_a_shortcut() {
        let g = sg(3, &[(0, 2, 0.5), (1, 2, 0.5)]);
        let d = weighted_shortest_paths(&g, 0, DistanceMode::Weight);
        assert_relative_eq!(d[1], 1.0);
    }

    /// Every simple path from `src`, tracking the best length to each node.
    fn enumerate_paths(sg: &EnclosingSubgraph, src: usize) -> Vec<f64> {
        fn walk(sg: &EnclosingSubgraph, at: usize, len: f64, seen: &mut Vec<bool>, best: &mut Vec<f64>) {
            best[at] = best[at].min(len);
            for (a, b, w) in sg.known_edges().collect::<Vec<_>>() {
                let next = if a == at { b } else if b == at { a } else { continue };
                if !seen[next] {
                    seen[next] = true;
                    walk(sg, next, len + w, seen, best);
                    seen[next] = false;
                }
            }
        }
        let mut best = vec![f64::INFINITY; sg.len()];
        let mut seen = vec![false; sg.len()];
        seen[src] = true;
        walk(sg, src, 0.0, &mut seen, &mut best);
        best
    }

    #[test]
    fn dijkstra_matches_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut edges = Vec::new();
            for i in 0..6 {
                for j in (i + 1)..6 {
                    if (i, j) != (0, 1) && rng.gen_bool(0.5) {
                        edges.push((i, j, rng.gen_range(0.01..0.99)));
                    }
                }
            }
            let g = sg(6, &edges);
            for src in 0..6 {
                let got = weighted_shortest_paths(&g, src, DistanceMode::Weight);
                let want = enumerate_paths(&g, src);
                for (x, y) in got.iter().zip(&want) {
                    if y.is_infinite() {
                        assert!(x.is_infinite());
                    } else {
                        assert_relative_eq!(x, y, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rank_encoding() {
        let inf = f64::INFINITY;
        assert_eq!(rank_encode(&[0.5, 0.2, inf, 0.5, 0.9]), vec![2, 1, 4, 2, 3]);
        assert_eq!(rank_encode(&[inf, inf]), vec![1, 1]);
        assert_eq!(rank_encode(&[0.1 + 0.2, 0.3]), vec![1, 1]);
    }

    #[test]
    fn two_node_orderings() {
        let g = sg(2, &[]);
        assert_eq!(order_nodes_wwl(&g, DistanceMode::Weight).order(), &[0, 1]);
        assert_eq!(order_nodes_random(&g, 9).order(), &[0, 1]);
    }

    #[test]
    fn hand_computed_five_node_order() {
        // d(2) = 0.1 + 0.1 = 0.2
        // d(3) = 0.2 + 0.3 = 0.5
        // d(4) = (0.1 + 0.1) + (0.1 + 0.1) = 0.4
        let g = sg(
            5,
            &[(0, 2, 0.1), (1, 2, 0.1), (0, 3, 0.2), (1, 3, 0.3), (2, 4, 0.1), (3, 4, 0.9)],
        );
        let d = target_distance_sums(&g, DistanceMode::Weight);
        assert_relative_eq!(d[2], 0.2, epsilon = 1e-12);
        assert_relative_eq!(d[3], 0.5, epsilon = 1e-12);
        assert_relative_eq!(d[4], 0.4, epsilon = 1e-12);
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        assert_eq!(ord.order(), &[0, 1, 2, 4, 3]);
        assert_eq!(ord.method(), LabelingMethod::WeightedWl);
    }

    #[test]
    fn signature_breaks_distance_ties() {
        // Nodes 2 and 3 are equidistant from the targets.
        let g = sg(
            6,
            &[(0, 2, 0.2), (1, 2, 0.2), (0, 3, 0.2), (1, 3, 0.2), (3, 4, 0.1), (2, 5, 0.3)],
        );
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        assert_eq!(&ord.order()[..2], &[0, 1]);
        // Node 3's neighbor 4 (rank 2) sorts before node 2's neighbor 5 (rank 3).
        assert_eq!(ord.order()[2], 3);
    }

    #[test]
    fn random_order_is_seeded() {
        let g = sg(10, &[]);
        let a = order_nodes_random(&g, 3);
        assert_eq!(a, order_nodes_random(&g, 3));
        assert_eq!(&a.order()[..2], &[0, 1]);
        assert_eq!(a.method(), LabelingMethod::Random);
    }

    #[test]
    fn random_order_is_uniform() {
        let g = sg(10, &[]);
        let mut counts = vec![vec![0usize; 10]; 10];
        let trials = 1000;
        for seed in 0..trials {
            let ord = order_nodes_random(&g, seed);
            for (p, &v) in ord.order().iter().enumerate() {
                counts[v][p] += 1;
            }
        }
        for (v, row) in counts.iter().enumerate().skip(2) {
            for (p, &c) in row.iter().enumerate().skip(2) {
                let f = c as f64 / trials as f64;
                assert!((f - 0.125).abs() <= 0.05, "node {v} at {p}: {f}");
            }
        }
    }

    #[test]
    fn triangle_feature_matrix() {
        let w = 0.4;
        let g = sg(3, &[(0, 2, w), (1, 2, w)]);
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        let fm = build_feature_matrix(&g, &ord, 10).unwrap();
        let m = fm.matrix();
        assert_eq!(m.dim(), (10, 10));
        assert_eq!(m[[0, 1]], -1.0);
        assert_eq!(m[[1, 0]], -1.0);
        assert_eq!(m[[0, 2]], w);
        assert_eq!(m[[1, 2]], w);
        assert_eq!(fm.n_real(), 3);
    }

    #[test]
    fn two_node_feature_matrix() {
        let g = sg(2, &[]);
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        let fm = build_feature_matrix(&g, &ord, 10).unwrap();
        let nonzero: Vec<_> = fm
            .matrix()
            .indexed_iter()
            .filter(|(_, &x)| x != 0.0)
            .map(|(ij, _)| ij)
            .collect();
        assert_eq!(nonzero, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn feature_matrix_contract_violations() {
        let g = sg(3, &[(0, 2, 0.5)]);
        let short = NodeOrdering::new(vec![0, 1], LabelingMethod::Random).unwrap();
        assert!(matches!(build_feature_matrix(&g, &short, 10), Err(Error::Contract(_))));
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        assert!(matches!(build_feature_matrix(&g, &ord, 2), Err(Error::Contract(_))));
        assert!(NodeOrdering::new(vec![0, 1, 1], LabelingMethod::Random).is_err());
        assert!(NodeOrdering::new(vec![1, 0, 2], LabelingMethod::Random).is_err());
    }

    #[test]
    fn ordering_json_dump() {
        let g = sg(3, &[(0, 2, 0.5)]);
        let ord = order_nodes_wwl(&g, DistanceMode::Weight);
        assert_eq!(ord.to_json(&g).unwrap(), r#"{"100":0,"101":1,"102":2}"#);
    }
}
