//! Line-graph view of an ordered enclosing subgraph.
//!
//! Each subgraph edge becomes a line node whose features are the ordered
//! adjacency rows of its two endpoints, lower-positioned endpoint first, so
//! the vector does not depend on which endpoint is named first.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::labeling::{NodeOrdering, OrderedFeatureMatrix};
use crate::subgraph::EnclosingSubgraph;

/// One training or evaluation example for the GCN.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGraphSample {
    /// Binary, symmetric, zero diagonal.
    pub adjacency: Array2<f64>,
    /// One row per line node, width `2 * max_nodes`.
    pub features: Array2<f64>,
    pub target_index: usize,
    /// Endpoint positions `(i, j)`, `i < j`, in the node ordering.
    pub endpoints: Vec<(usize, usize)>,
    /// True normalized target weight; only set on samples used for training
    /// or scoring, never read while building features.
    pub label: Option<f64>,
}

impl LineGraphSample {
    pub fn n_lg(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn with_label(mut self, label: f64) -> Self {
        self.label = Some(label);
        self
    }

    /// Number of line-graph edges.
    pub fn lg_edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&x| x != 0.0).count() / 2
    }
}

fn features_at_positions(i: usize, j: usize, fm: &OrderedFeatureMatrix) -> Array1<f64> {
    let (lo, hi) = (i.min(j), i.max(j));
    let width = fm.max_nodes();
    let mut out = Array1::zeros(2 * width);
    out.slice_mut(s![..width]).assign(&fm.row(lo));
    out.slice_mut(s![width..]).assign(&fm.row(hi));
    out
}

/// Feature vector of the line node for edge `(u, v)`, given local indices.
pub fn line_node_features(
    u: usize,
    v: usize,
    fm: &OrderedFeatureMatrix,
    ord: &NodeOrdering,
) -> Result<Array1<f64>> {
    let n = ord.len();
    if u >= n || v >= n {
        return Err(Error::Contract(format!("endpoint of ({u}, {v}) is not ordered")));
    }
    let pos = ord.positions();
    Ok(features_at_positions(pos[u], pos[v], fm))
}

/// Builds the line graph of `sg` with features from `fm`.
///
/// Line nodes are sorted by endpoint positions, so the target edge
/// (positions 0 and 1) is always line node 0.
pub fn to_line_graph(
    sg: &EnclosingSubgraph,
    fm: &OrderedFeatureMatrix,
    ord: &NodeOrdering,
) -> Result<LineGraphSample> {
    if ord.len() != sg.len() || fm.n_real() != sg.len() {
        return Err(Error::Contract(
            "feature matrix and ordering must describe the same subgraph".into(),
        ));
    }
    if sg.edge_count() == 0 {
        return Err(Error::Contract("subgraph has no edges".into()));
    }
    let pos = ord.positions();
    let mut endpoints: Vec<(usize, usize)> = sg
        .structural_edges()
        .map(|(a, b)| {
            let (i, j) = (pos[a], pos[b]);
            (i.min(j), i.max(j))
        })
        .collect();
    endpoints.sort_unstable();

    let m = endpoints.len();
    let mut adjacency = Array2::zeros((m, m));
    for x in 0..m {
        for y in (x + 1)..m {
            let (a, b) = endpoints[x];
            let (c, d) = endpoints[y];
            if a == c || a == d || b == c || b == d {
                adjacency[[x, y]] = 1.0;
                adjacency[[y, x]] = 1.0;
            }
        }
    }

    let width = 2 * fm.max_nodes();
    let mut features = Array2::zeros((m, width));
    for (row, &(i, j)) in endpoints.iter().enumerate() {
        features.row_mut(row).assign(&features_at_positions(i, j, fm));
    }

    let target_index = endpoints
        .iter()
        .position(|&e| e == (0, 1))
        .ok_or_else(|| Error::Contract("target edge missing from subgraph".into()))?;

    Ok(LineGraphSample {
        adjacency,
        features,
        target_index,
        endpoints,
        label: None,
    })
}
