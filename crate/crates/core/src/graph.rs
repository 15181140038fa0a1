//! Weighted undirected graphs: ingestion, weight normalization and
//! train/test weight splitting.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge stored canonically with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn key(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

/// How the two directions of a pair are merged when both appear. A line
/// repeated in the same direction always keeps its last weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DupPolicy {
    Last,
    #[default]
    Max,
    Sum,
}

impl DupPolicy {
    fn merge(self, old: f64, new: f64) -> f64 {
        match self {
            DupPolicy::Last => new,
            DupPolicy::Max => old.max(new),
            DupPolicy::Sum => old + new,
        }
    }
}

impl FromStr for DupPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(DupPolicy::Last),
            "max" => Ok(DupPolicy::Max),
            "sum" => Ok(DupPolicy::Sum),
            other => Err(Error::Config(format!("unknown duplicate policy `{other}`"))),
        }
    }
}

/// Undirected graph with strictly positive edge weights.
///
/// Immutable once built. Edges are kept sorted by `(u, v)` and each
/// adjacency list is sorted by neighbor, so lookups are binary searches.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    labels: Vec<String>,
}

impl WeightedGraph {
    /// Builds a graph over `node_count` nodes; see [`DupPolicy`] for duplicates.
    pub fn from_edges<I>(node_count: usize, edges: I, policy: DupPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        Self::from_labeled_edges(labels, edges, policy)
    }

    fn from_labeled_edges<I>(labels: Vec<String>, edges: I, policy: DupPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let node_count = labels.len();
        // a repeated line overwrites itself; both directions then merge by `policy`
        let mut directed: HashMap<(usize, usize), (usize, f64)> = HashMap::new();
        for (pos, (a, b, w)) in edges.into_iter().enumerate() {
            if a >= node_count {
                return Err(Error::MissingNode(a));
            }
            if b >= node_count {
                return Err(Error::MissingNode(b));
            }
            if a == b {
                return Err(Error::Contract(format!("self-loop on node {a}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(w));
            }
            directed.insert((a, b), (pos, w));
        }
        let mut latest: Vec<((usize, usize), (usize, f64))> = directed.into_iter().collect();
        latest.sort_unstable_by_key(|&(_, (pos, _))| pos);
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for ((a, b), (_, w)) in latest {
            merged
                .entry((a.min(b), a.max(b)))
                .and_modify(|old| *old = policy.merge(*old, w))
                .or_insert(w);
        }
        let mut edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect();
        edges.sort_by_key(Edge::key);
        Ok(Self::assemble(labels, edges))
    }

    /// `edges` must already be canonical, deduplicated and sorted.
    fn assemble(labels: Vec<String>, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); labels.len()];
        for e in &edges {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
        }
        WeightedGraph {
            edges,
            adjacency,
            labels,
        }
    }

    /// Same node set, different (already canonical) edge subset.
    fn with_edges(&self, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(Edge::key);
        Self::assemble(self.labels.clone(), edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Sum of incident edge weights.
    pub fn strength(&self, node: usize) -> f64 {
        self.adjacency[node].iter().map(|&(_, w)| w).sum()
    }

    pub fn contains_node(&self, node: usize) -> bool {
        node < self.node_count()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let list = self.adjacency.get(a)?;
        list.binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|i| list[i].1)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.weight(a, b).is_some()
    }

    /// Index of the edge `{a, b}` in [`edges`](Self::edges).
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search_by_key(&key, Edge::key).ok()
    }

    /// Original identifier of a dense node index.
    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn id_map(&self) -> IdMap {
        IdMap {
            ids: self.labels.clone(),
        }
    }

    /// Writes `u v w` lines using the original node identifiers.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.edges {
            writeln!(out, "{} {} {}", self.labels[e.u], self.labels[e.v], e.weight)?;
        }
        Ok(())
    }
}

/// Dense index to original identifier, persisted as JSON next to reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    pub ids: Vec<String>,
}

/// Parses a whitespace-separated `u v w` edge list.
///
/// Lines starting with `#` (or `%`) and blank lines are skipped. Node
/// identifiers are arbitrary tokens and are renumbered densely in order of
/// first appearance. Self-loop lines are dropped.
pub fn parse_edge_list<R: BufRead>(reader: R, policy: DupPolicy) -> Result<WeightedGraph> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut raw = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `u v w`, found {} field(s)", fields.len()),
            });
        }
        let weight: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("weight `{}` is not a number", fields[2]),
        })?;
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::NonPositiveWeight {
                line: lineno,
                weight,
            });
        }
        let mut intern = |tok: &str| {
            *index.entry(tok.to_owned()).or_insert_with(|| {
                labels.push(tok.to_owned());
                labels.len() - 1
            })
        };
        let a = intern(fields[0]);
        let b = intern(fields[1]);
        if a != b {
            raw.push((a, b, weight));
        }
    }

    WeightedGraph::from_labeled_edges(labels, raw, policy)
}

/// Maps every weight through `w -> exp(-1/w)`, landing in (0, 1) and
/// preserving order.
pub fn normalize_weights(g: &WeightedGraph) -> Result<WeightedGraph> {
    let edges = g
        .edges
        .iter()
        .map(|e| {
            normalize_weight(e.weight).map(|weight| Edge { weight, ..*e })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(g.with_edges(edges))
}

/// Fails for `w <= 0` and for weights whose image rounds to 0 or 1.
pub fn normalize_weight(w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Domain(w));
    }
    let out = (-1.0 / w).exp();
    if out > 0.0 && out < 1.0 {
        Ok(out)
    } else {
        Err(Error::Domain(w))
    }
}

/// Parameters of the repeated random train/test protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub seed: u64,
    pub repeats: usize,
}

impl SplitSpec {
    /// Seed used for repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn split(&self, g: &WeightedGraph, r: usize) -> Result<WeightSplit> {
        split_train_test(g, self.train_ratio, self.repeat_seed(r))
    }
}

/// A partition of the edge set into observed (train) and hidden (test) weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSplit {
    pub seed: u64,
    pub train_ratio: f64,
    pub train_edges: Vec<Edge>,
    pub test_edges: Vec<Edge>,
}

impl WeightSplit {
    /// The graph `G(V, E, W_train)`: all nodes, only training edges.
    pub fn train_graph(&self, g: &WeightedGraph) -> WeightedGraph {
        g.with_edges(self.train_edges.clone())
    }
}

/// Number of training edges: `round(ratio * |E|)`.
pub fn train_size(edge_count: usize, train_ratio: f64) -> usize {
    (train_ratio * edge_count as f64).round() as usize
}

/// Uniformly partitions the edges; the same seed always yields the same split.
pub fn split_train_test(g: &WeightedGraph, train_ratio: f64, seed: u64) -> Result<WeightSplit> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train ratio {train_ratio} must lie strictly between 0 and 1"
        )));
    }
    let m = g.edge_count();
    let n_train = train_size(m, train_ratio);
    if n_train == 0 || n_train >= m {
        return Err(Error::Config(format!(
            "train ratio {train_ratio} on {m} edges leaves an empty train or test set"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train: Vec<Edge> = order[..n_train].iter().map(|&i| g.edges[i]).collect();
    let mut test: Vec<Edge> = order[n_train..].iter().map(|&i| g.edges[i]).collect();
    train.sort_by_key(Edge::key);
    test.sort_by_key(Edge::key);
    Ok(WeightSplit {
        seed,
        train_ratio,
        train_edges: train,
        test_edges: test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parse(text: &str) -> Result<WeightedGraph> {
        parse_edge_list(text.as_bytes(), DupPolicy::Max)
    }

    #[test]
    fn parses_simple_list() {
        let g = parse("0 1 2.0\n1 2 3.0").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(1, 0), Some(2.0));
    }

    #[test]
    fn reversed_duplicate_keeps_later_larger_weight() {
        for policy in [DupPolicy::Last, DupPolicy::Max] {
            let g = parse_edge_list("1 2 1.0\n2 1 5.0".as_bytes(), policy).unwrap();
            assert_eq!(g.edge_count(), 1);
            let (a, b) = (0, 1);
            assert_eq!(g.label(a), "1");
            assert_eq!(g.weight(a, b), Some(5.0));
        }
    }

    #[test]
    fn duplicate_policies() {
        let text = "a b 3\nb a 1";
        let w = |p| parse_edge_list(text.as_bytes(), p).unwrap().edges()[0].weight;
        assert_eq!(w(DupPolicy::Last), 1.0);
        assert_eq!(w(DupPolicy::Max), 3.0);
        assert_eq!(w(DupPolicy::Sum), 4.0);
    }

    #[test]
    fn repeated_line_keeps_its_last_weight_under_every_policy() {
        let text = "a b 3\na b 1\nb a 2";
        let w = |p| parse_edge_list(text.as_bytes(), p).unwrap().edges()[0].weight;
        assert_eq!(w(DupPolicy::Last), 2.0);
        assert_eq!(w(DupPolicy::Max), 2.0);
        assert_eq!(w(DupPolicy::Sum), 3.0);
        let same = |p| parse_edge_list("a b 3\na b 1".as_bytes(), p).unwrap().edges()[0].weight;
        for p in [DupPolicy::Last, DupPolicy::Max, DupPolicy::Sum] {
            assert_eq!(same(p), 1.0);
        }
    }

    #[test]
    fn comments_and_extra_columns() {
        let g = parse("# header\n% konect style\n\nx y 1.5 1999\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.label(0), "x");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("0 1 1\n0 2 abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse("0 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_weight_is_rejected() {
        assert!(matches!(
            parse("0 1 1\n1 2 0\n"),
            Err(Error::NonPositiveWeight { line: 2, .. })
        ));
        assert!(matches!(
            parse("0 1 -2\n"),
            Err(Error::NonPositiveWeight { line: 1, .. })
        ));
    }

    #[test]
    fn self_loops_are_dropped() {
        let g = parse("0 0 1\n0 1 1\n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn normalization_values() {
        assert_relative_eq!(normalize_weight(1.0).unwrap(), 0.367_879_441_171_442_3, epsilon = 1e-12);
        assert_relative_eq!(normalize_weight(72.0).unwrap(), 0.986_207_116_743_916, epsilon = 1e-12);
        assert!(normalize_weight(1.0).unwrap() < normalize_weight(3.0).unwrap());
        assert!(matches!(normalize_weight(0.0), Err(Error::Domain(_))));
        assert!(matches!(normalize_weight(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn normalized_graph_is_in_unit_interval() {
        let g = parse("0 1 0.0526\n1 2 2.5\n2 3 72\n").unwrap();
        let n = normalize_weights(&g).unwrap();
        assert_eq!(n.edge_count(), 3);
        for e in n.edges() {
            assert!(e.weight > 0.0 && e.weight < 1.0);
        }
        // exp(-1/5.5e-9) underflows.
        assert!(matches!(normalize_weights(&n), Err(Error::Domain(_))));
        assert!(matches!(normalize_weight(1e17), Err(Error::Domain(_))));

        // Applying the map again is still a valid (0,1) graph, not the identity.
        let g = parse("0 1 1\n1 2 2.5\n2 3 72\n").unwrap();
        let n = normalize_weights(&g).unwrap();
        let nn = normalize_weights(&n).unwrap();
        assert!(nn.edges().iter().all(|e| e.weight > 0.0 && e.weight < 1.0));
        assert_ne!(nn, n);
    }

    #[test]
    fn split_two_edges_half() {
        let g = parse("0 1 1\n1 2 1\n").unwrap();
        let s = split_train_test(&g, 0.5, 3).unwrap();
        assert_eq!(s.train_edges.len(), 1);
        assert_eq!(s.test_edges.len(), 1);
    }

    #[test]
    fn split_rejects_degenerate_ratios() {
        let g = parse("0 1 1\n1 2 1\n").unwrap();
        for r in [0.0, 1.0, 0.1, 0.9, -0.5, f64::NAN] {
            assert!(matches!(split_train_test(&g, r, 0), Err(Error::Config(_))), "{r}");
        }
    }

    #[test]
    fn split_sizes_use_rounding() {
        assert_eq!(train_size(2137, 0.9), 1923);
        assert_eq!(train_size(1028, 0.9), 925);
        assert_eq!(train_size(2, 0.5), 1);
    }

    #[test]
    fn train_graph_keeps_node_set() {
        let g = parse("0 1 1\n1 2 1\n2 3 1\n3 0 1\n").unwrap();
        let s = split_train_test(&g, 0.5, 11).unwrap();
        let tg = s.train_graph(&g);
        assert_eq!(tg.node_count(), 4);
        assert_eq!(tg.edge_count(), 2);
        for e in &s.test_edges {
            assert!(!tg.has_edge(e.u, e.v));
        }
    }
}
