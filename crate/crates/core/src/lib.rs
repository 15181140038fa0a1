//! Link weight prediction on weighted networks.
//!
//! The pipeline for one target link `(u, v)`:
//!
//! 1. [`subgraph`]: take the 1-hop enclosing subgraph from the training graph,
//!    capped at `max_nodes` nodes.
//! 2. [`labeling`]: order its nodes (weighted Weisfeiler-Lehman or random) and
//!    build the ordered adjacency matrix with the target weight masked.
//! 3. [`line_graph`]: turn subgraph edges into line nodes with concatenated
//!    endpoint rows as features.
//! 4. [`gcn`]: regress the target line node's weight with a graph
//!    convolutional network.
//!
//! [`baselines`] holds weighted common-neighbor heuristics and [`harness`]
//! runs repeated train/test experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod harness;
pub mod labeling;
pub mod line_graph;
pub mod metrics;
pub mod subgraph;

pub use error::{Error, Result};
pub use graph::{DupPolicy, Edge, WeightedGraph};
