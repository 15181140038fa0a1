//! Python bindings: graphs, per-link samples, heuristics, experiments and
//! the gradient check. Reports come back as plain dicts.

use std::path::PathBuf;

use lglwp_core::baselines::{self, Heuristic};
use lglwp_core::gcn::{gradient_check_suite, GradCheckOptions};
use lglwp_core::graph::{normalize_weights, parse_edge_list, split_train_test, DupPolicy, Edge, WeightedGraph};
use lglwp_core::harness::{self, ExperimentConfig, Labeling, Method};
use lglwp_core::labeling::DistanceMode;
use lglwp_core::subgraph::ExtractOptions;
use lglwp_core::Error;
use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Read { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Serializes through JSON so reports arrive as ordinary dicts and lists.
fn to_python<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

type EdgeTuples = Vec<(usize, usize, f64)>;

fn edge_tuples(edges: &[Edge]) -> EdgeTuples {
    edges.iter().map(|e| (e.u, e.v, e.weight)).collect()
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Undirected weighted graph with dense node ids.
#[pyclass(name = "Graph", module = "lglwp", frozen)]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    /// `edges` holds `(u, v, weight)` triples over ids `0..num_nodes`.
    #[new]
    #[pyo3(signature = (edges, num_nodes=None, dup_policy="max"))]
    fn new(edges: EdgeTuples, num_nodes: Option<usize>, dup_policy: &str) -> PyResult<Self> {
        let n = num_nodes.unwrap_or_else(|| edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(0));
        let inner = WeightedGraph::from_edges(n, edges, parse(dup_policy)?).map_err(err)?;
        Ok(PyGraph { inner })
    }

    /// Reads a `u v w` edge list; weights are mapped into (0, 1) unless
    /// `normalize` is false.
    #[staticmethod]
    #[pyo3(signature = (path, dup_policy="max", normalize=true))]
    fn read(path: PathBuf, dup_policy: &str, normalize: bool) -> PyResult<Self> {
        let policy: DupPolicy = parse(dup_policy)?;
        let inner = if normalize {
            harness::load_dataset(&path, policy).map_err(err)?
        } else {
            let file = std::fs::File::open(&path).map_err(|e| err(e.into()))?;
            parse_edge_list(std::io::BufReader::new(file), policy).map_err(err)?
        };
        Ok(PyGraph { inner })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> EdgeTuples {
        edge_tuples(self.inner.edges())
    }

    fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.inner.weight(u, v)
    }

    fn neighbors(&self, u: usize) -> PyResult<Vec<(usize, f64)>> {
        if !self.inner.contains_node(u) {
            return Err(err(Error::MissingNode(u)));
        }
        Ok(self.inner.neighbors(u).to_vec())
    }

    fn strength(&self, u: usize) -> PyResult<f64> {
        if !self.inner.contains_node(u) {
            return Err(err(Error::MissingNode(u)));
        }
        Ok(self.inner.strength(u))
    }

    /// Original identifier of node `u`.
    fn label(&self, u: usize) -> PyResult<String> {
        if !self.inner.contains_node(u) {
            return Err(err(Error::MissingNode(u)));
        }
        Ok(self.inner.label(u).to_owned())
    }

    /// Copy with every weight mapped through `exp(-1 / w)`.
    fn normalized(&self) -> PyResult<Self> {
        Ok(PyGraph {
            inner: normalize_weights(&self.inner).map_err(err)?,
        })
    }

    /// Seeded `(train_edges, test_edges)` partition.
    fn split(&self, train_ratio: f64, seed: u64) -> PyResult<(EdgeTuples, EdgeTuples)> {
        let s = split_train_test(&self.inner, train_ratio, seed).map_err(err)?;
        Ok((edge_tuples(&s.train_edges), edge_tuples(&s.test_edges)))
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| err(e.into()))?;
        self.inner.write_edge_list(std::io::BufWriter::new(file)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_nodes={}, num_edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Every stage of the per-link pipeline for one target link.
#[pyclass(name = "LinkSample", module = "lglwp", frozen, get_all)]
struct PyLinkSample {
    /// Global node ids, targets first.
    nodes: Vec<usize>,
    /// Global node ids in label order.
    order: Vec<usize>,
    /// `max_nodes × max_nodes`, target entries set to −1.
    feature_matrix: Vec<Vec<f64>>,
    line_adjacency: Vec<Vec<f64>>,
    line_features: Vec<Vec<f64>>,
    /// Label positions of each line node's endpoints.
    line_endpoints: Vec<(usize, usize)>,
    target_index: usize,
}

/// Builds the sample for link `(u, v)` from `graph`, which should hold only
/// observed (training) weights.
#[pyfunction]
#[pyo3(signature = (graph, u, v, max_nodes=10, hop=1, labeling="wwl", distance="weight", seed=0))]
#[allow(clippy::too_many_arguments)]
fn prepare_link(
    graph: &PyGraph,
    u: usize,
    v: usize,
    max_nodes: usize,
    hop: usize,
    labeling: &str,
    distance: &str,
    seed: u64,
) -> PyResult<PyLinkSample> {
    let labeling = match labeling {
        "wwl" | "weighted" => Labeling::WeightedWl(parse::<DistanceMode>(distance)?),
        "random" => Labeling::Random,
        other => return Err(PyValueError::new_err(format!("unknown labeling `{other}`"))),
    };
    let opts = ExtractOptions { hop, max_nodes };
    let s = harness::prepare_link(&graph.inner, u, v, &opts, labeling, seed).map_err(err)?;
    let nodes = s.subgraph.nodes().to_vec();
    let order = s.ordering.order().iter().map(|&local| nodes[local]).collect();
    let lg = &s.line_graph;
    Ok(PyLinkSample {
        feature_matrix: rows(s.features.matrix()),
        line_adjacency: rows(&lg.adjacency),
        line_features: rows(&lg.features),
        line_endpoints: lg.endpoints.clone(),
        target_index: lg.target_index,
        order,
        nodes,
    })
}

/// `w -> exp(-1 / w)`.
#[pyfunction]
fn normalize_weight(w: f64) -> PyResult<f64> {
    lglwp_core::graph::normalize_weight(w).map_err(err)
}

/// Raw WCN, WAA or WRA score of `(u, v)`.
#[pyfunction]
fn heuristic(graph: &PyGraph, name: &str, u: usize, v: usize) -> PyResult<f64> {
    let h: Heuristic = parse(name)?;
    Ok(baselines::score(&graph.inner, h, u, v).map_err(err)?.score)
}

#[pyfunction]
fn rmse(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    lglwp_core::metrics::rmse(&pred, &truth).map_err(err)
}

/// Experiment settings; keyword arguments mirror the command-line flags.
#[pyclass(name = "ExperimentConfig", module = "lglwp", frozen)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        dataset=None, *, method="lglwp", train_ratio=0.9, repeats=10, epochs=None, seed=0,
        max_nodes=10, out=None, dup_policy="max", distance="weight", hop=1, batch_size=32,
        learning_rate=1e-3, optimizer="adam", test_fraction=1.0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        dataset: Option<PathBuf>,
        method: &str,
        train_ratio: f64,
        repeats: usize,
        epochs: Option<usize>,
        seed: u64,
        max_nodes: usize,
        out: Option<PathBuf>,
        dup_policy: &str,
        distance: &str,
        hop: usize,
        batch_size: usize,
        learning_rate: f64,
        optimizer: &str,
        test_fraction: f64,
    ) -> PyResult<Self> {
        let inner = ExperimentConfig {
            dataset_path: dataset.unwrap_or_default(),
            method: parse::<Method>(method)?,
            train_ratio,
            repeats,
            epochs,
            seed,
            max_nodes,
            hop,
            dup_policy: parse(dup_policy)?,
            distance: parse(distance)?,
            batch_size,
            learning_rate,
            optimizer: parse(optimizer)?,
            test_fraction,
            output_path: out,
        };
        inner.validate().map_err(err)?;
        Ok(PyConfig { inner })
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.resolved_epochs()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_python(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(dataset={:?}, method={:?}, repeats={}, epochs={}, seed={})",
            self.inner.dataset_path.display().to_string(),
            self.inner.method.as_str(),
            self.inner.repeats,
            self.inner.resolved_epochs(),
            self.inner.seed
        )
    }
}

/// Loads `config`'s dataset, runs every repeat and returns the report.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &PyConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let report = py.detach(move || harness::run_experiment(&cfg)).map_err(err)?;
    to_python(py, &report)
}

/// Runs `config` on an in-memory graph with weights already in (0, 1).
#[pyfunction]
fn run_experiment_on_graph(py: Python<'_>, graph: &PyGraph, config: &PyConfig) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let g = &graph.inner;
    let report = py.detach(|| harness::run_experiment_on_graph(g, &cfg)).map_err(err)?;
    to_python(py, &report)
}

/// Weighted versus random ordering on shared splits.
#[pyfunction]
#[pyo3(signature = (config, graph=None))]
fn run_ablation(py: Python<'_>, config: &PyConfig, graph: Option<&PyGraph>) -> PyResult<Py<PyAny>> {
    let cfg = config.inner.clone();
    let paired = match graph {
        Some(g) => {
            let g = &g.inner;
            py.detach(|| harness::run_ablation_on_graph(g, &cfg))
        }
        None => py.detach(|| harness::run_ablation(&cfg)),
    }
    .map_err(err)?;
    to_python(py, &paired)
}

/// Finite-difference check of the network's gradients on random samples.
#[pyfunction]
#[pyo3(signature = (draws=20, seed=0, max_nodes=10, step=1e-5, rel_tol=1e-4, abs_floor=1e-7))]
fn gradient_check(
    py: Python<'_>,
    draws: usize,
    seed: u64,
    max_nodes: usize,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> PyResult<Py<PyAny>> {
    let opts = GradCheckOptions {
        draws,
        seed,
        max_nodes,
        step,
        rel_tol,
        abs_floor,
    };
    let reports = py.detach(|| gradient_check_suite(&opts)).map_err(err)?;
    to_python(py, &reports)
}

#[pymodule]
fn lglwp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyLinkSample>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(prepare_link, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_weight, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_on_graph, m)?)?;
    m.add_function(wrap_pyfunction!(run_ablation, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    Ok(())
}
