#![allow(dead_code)]

use lglwp_core::graph::{DupPolicy, WeightedGraph};
use lglwp_core::harness::{prepare_link, Labeling, LinkSample};
use lglwp_core::labeling::DistanceMode;
use lglwp_core::subgraph::ExtractOptions;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with weights in (0.01, 0.99).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j, rng.gen_range(0.01..0.99)));
            }
        }
    }
    WeightedGraph::from_edges(n, edges, DupPolicy::Max).unwrap()
}

/// A random link sample: random graph, random existing edge as target.
pub fn random_link_sample(rng: &mut ChaCha8Rng, labeling: Labeling) -> LinkSample {
    loop {
        let n = rng.gen_range(3..=14);
        let p = rng.gen_range(0.2..0.7);
        let g = random_graph(rng, n, p);
        if g.edge_count() == 0 {
            continue;
        }
        let e = g.edges()[rng.gen_range(0..g.edge_count())];
        let seed = rng.gen();
        return prepare_link(&g, e.u, e.v, &ExtractOptions::default(), labeling, seed).unwrap();
    }
}

pub fn wwl() -> Labeling {
    Labeling::WeightedWl(DistanceMode::Weight)
}

/// Dense matrix product over nested vectors, independent of ndarray.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn to_rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}
