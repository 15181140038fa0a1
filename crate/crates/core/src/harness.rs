//! Experiment orchestration: repeated splits, per-link sample construction,
//! training, scoring and reports.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, Heuristic, HeuristicScore};
use crate::error::{Error, Result};
use crate::gcn::{self, GraphInput, OptimizerKind, TrainConfig};
use crate::graph::{normalize_weights, parse_edge_list, DupPolicy, Edge, SplitSpec, WeightSplit, WeightedGraph};
use crate::labeling::{
    build_feature_matrix, order_nodes_random, order_nodes_wwl, DistanceMode, NodeOrdering, OrderedFeatureMatrix, MASK,
};
use crate::line_graph::{to_line_graph, LineGraphSample};
use crate::metrics::{mean, rmse, sample_std};
use crate::subgraph::{extract_enclosing_subgraph, EnclosingSubgraph, ExtractOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lglwp,
    LglwpRandomLabel,
    Wcn,
    Waa,
    Wra,
}

impl Method {
    pub fn heuristic(self) -> Option<Heuristic> {
        match self {
            Method::Wcn => Some(Heuristic::Wcn),
            Method::Waa => Some(Heuristic::Waa),
            Method::Wra => Some(Heuristic::Wra),
            Method::Lglwp | Method::LglwpRandomLabel => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lglwp => "lglwp",
            Method::LglwpRandomLabel => "lglwp_random_label",
            Method::Wcn => "wcn",
            Method::Waa => "waa",
            Method::Wra => "wra",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "lglwp" => Ok(Method::Lglwp),
            "lglwp_random_label" | "random_label" => Ok(Method::LglwpRandomLabel),
            "wcn" => Ok(Method::Wcn),
            "waa" => Ok(Method::Waa),
            "wra" => Ok(Method::Wra),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Everything that determines an experiment's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub method: Method,
    pub train_ratio: f64,
    pub repeats: usize,
    /// `None` picks the per-dataset default (see [`default_epochs`]).
    pub epochs: Option<usize>,
    pub seed: u64,
    pub max_nodes: usize,
    pub hop: usize,
    pub dup_policy: DupPolicy,
    pub distance: DistanceMode,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Fraction of test links scored per repeat; 1.0 scores all of them.
    pub test_fraction: f64,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            dataset_path: PathBuf::new(),
            method: Method::Lglwp,
            train_ratio: 0.9,
            repeats: 10,
            epochs: None,
            seed: 0,
            max_nodes: 10,
            hop: 1,
            dup_policy: DupPolicy::Max,
            distance: DistanceMode::Weight,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            optimizer: train.optimizer,
            test_fraction: 1.0,
            output_path: None,
        }
    }
}

/// 5 epochs for the large networks (P.blog, UC-social, Condmat), 15 otherwise,
/// keyed on the dataset file name.
pub fn default_epochs(path: &Path) -> usize {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    let compact: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    let large = ["pblog", "polblog", "ucsocial", "condmat"];
    if large.iter().any(|k| compact.contains(k)) {
        5
    } else {
        15
    }
}

impl ExperimentConfig {
    pub fn resolved_epochs(&self) -> usize {
        self.epochs.unwrap_or_else(|| default_epochs(&self.dataset_path))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "train ratio {} must lie strictly between 0 and 1",
                self.train_ratio
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.max_nodes < 2 {
            return Err(Error::Config("max_nodes must be at least 2".into()));
        }
        if self.hop == 0 {
            return Err(Error::Config("hop must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction <= 1.0) {
            return Err(Error::Config("test fraction must lie in (0, 1]".into()));
        }
        self.train_config(0).validate()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_ratio: self.train_ratio,
            seed: self.seed,
            repeats: self.repeats,
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            hop: self.hop,
            max_nodes: self.max_nodes,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.resolved_epochs(),
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            optimizer: self.optimizer,
            ..TrainConfig::default()
        }
    }
}

/// Reads an edge list and applies weight normalization.
pub fn load_dataset(path: &Path, policy: DupPolicy) -> Result<WeightedGraph> {
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.display().to_string(),
        source,
    })?;
    let raw = parse_edge_list(BufReader::new(file), policy)?;
    normalize_weights(&raw)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-link seed: `splitmix64(run_seed ^ splitmix64(edge_id))`. Independent
/// of the order in which links are processed.
pub fn link_seed(run_seed: u64, edge_id: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(edge_id as u64))
}

const ORDER_STREAM: u64 = 0x5bd1_e995_0000_0001;

/// Which node ordering a sample uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    WeightedWl(DistanceMode),
    Random,
}

/// A fully built per-link example, with the intermediate stages kept.
#[derive(Debug, Clone)]
pub struct LinkSample {
    pub subgraph: EnclosingSubgraph,
    pub ordering: NodeOrdering,
    pub features: OrderedFeatureMatrix,
    pub line_graph: LineGraphSample,
}

/// Builds the sample for link `(u, v)` from the observed (training) graph.
/// `seed` drives node sampling and, for random labeling, the shuffle.
pub fn prepare_link(
    observed: &WeightedGraph,
    u: usize,
    v: usize,
    opts: &ExtractOptions,
    labeling: Labeling,
    seed: u64,
) -> Result<LinkSample> {
    let subgraph = extract_enclosing_subgraph(observed, u, v, opts, seed)?;
    let ordering = match labeling {
        Labeling::WeightedWl(mode) => order_nodes_wwl(&subgraph, mode),
        Labeling::Random => order_nodes_random(&subgraph, seed ^ ORDER_STREAM),
    };
    let features = build_feature_matrix(&subgraph, &ordering, opts.max_nodes)?;
    let line_graph = to_line_graph(&subgraph, &features, &ordering)?;
    Ok(LinkSample {
        subgraph,
        ordering,
        features,
        line_graph,
    })
}

/// Fails if a sample could expose a hidden weight: the target entries must
/// hold the mask, and no observed subgraph edge may be a test link or the
/// target itself.
pub fn leak_guard(sample: &LinkSample, hidden: &HashSet<(usize, usize)>) -> Result<()> {
    let m = sample.features.matrix();
    if m[[0, 1]] != MASK || m[[1, 0]] != MASK {
        return Err(Error::Contract("target weight is not masked".into()));
    }
    let nodes = sample.subgraph.nodes();
    for (a, b, _) in sample.subgraph.known_edges() {
        if sample.subgraph.is_target_edge(a, b) {
            return Err(Error::Contract("target edge weight is observable".into()));
        }
        let (x, y) = (nodes[a], nodes[b]);
        if hidden.contains(&(x.min(y), x.max(y))) {
            return Err(Error::Contract(format!("test link ({x}, {y}) leaked into a subgraph")));
        }
    }
    Ok(())
}

/// Result of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    pub seed: u64,
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub loss_curve: Option<Vec<f64>>,
}

fn scored_test_edges(split: &WeightSplit, fraction: f64, seed: u64) -> Vec<Edge> {
    if fraction >= 1.0 {
        return split.test_edges.clone();
    }
    let n = split.test_edges.len();
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| split.test_edges[i]).collect()
}

fn build_inputs(
    g: &WeightedGraph,
    observed: &WeightedGraph,
    edges: &[Edge],
    cfg: &ExperimentConfig,
    labeling: Labeling,
    run_seed: u64,
    hidden: &HashSet<(usize, usize)>,
) -> Result<Vec<GraphInput>> {
    let opts = cfg.extract_options();
    edges
        .par_iter()
        .map(|e| {
            let id = g.edge_id(e.u, e.v).expect("split edges belong to the graph");
            let sample = prepare_link(observed, e.u, e.v, &opts, labeling, link_seed(run_seed, id))?;
            leak_guard(&sample, hidden)?;
            GraphInput::from_sample(&sample.line_graph.with_label(e.weight))
        })
        .collect()
}

/// Runs repeat `r` of `cfg` on an already normalized graph.
pub fn run_repeat(g: &WeightedGraph, cfg: &ExperimentConfig, r: usize) -> Result<RunResult> {
    let spec = cfg.split_spec();
    let seed = spec.repeat_seed(r);
    let split = spec.split(g, r)?;
    let observed = split.train_graph(g);
    let test = scored_test_edges(&split, cfg.test_fraction, seed);
    let truth: Vec<f64> = test.iter().map(|e| e.weight).collect();

    if let Some(h) = cfg.method.heuristic() {
        let train_pairs = split
            .train_edges
            .par_iter()
            .map(|e| baselines::score(&observed, h, e.u, e.v).map(|s| (s.score, e.weight)))
            .collect::<Result<Vec<_>>>()?;
        let scores = test
            .par_iter()
            .map(|e| baselines::score(&observed, h, e.u, e.v))
            .collect::<Result<Vec<HeuristicScore>>>()?;
        let pred = baselines::calibrate_and_predict(&scores, &train_pairs)?;
        return Ok(RunResult {
            repeat: r,
            seed,
            rmse: rmse(&pred, &truth)?,
            n_train: split.train_edges.len(),
            n_test: test.len(),
            loss_curve: None,
        });
    }

    let labeling = match cfg.method {
        Method::LglwpRandomLabel => Labeling::Random,
        _ => Labeling::WeightedWl(cfg.distance),
    };
    let hidden: HashSet<(usize, usize)> = split.test_edges.iter().map(Edge::key).collect();
    let train_inputs = build_inputs(g, &observed, &split.train_edges, cfg, labeling, seed, &hidden)?;
    let outcome = gcn::train(&train_inputs, &cfg.train_config(seed))?;
    drop(train_inputs);
    let test_inputs = build_inputs(g, &observed, &test, cfg, labeling, seed, &hidden)?;
    let pred = gcn::predict(&test_inputs, &outcome.params)?;
    Ok(RunResult {
        repeat: r,
        seed,
        rmse: rmse(&pred, &truth)?,
        n_train: split.train_edges.len(),
        n_test: test.len(),
        loss_curve: Some(outcome.loss_curve),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub repeat: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
}

/// Aggregated outcome of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub config: ExperimentConfig,
    pub epochs: usize,
    pub graph: GraphSummary,
    pub runs: Vec<RunResult>,
    pub per_run_rmse: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub std: f64,
    pub failures: Vec<RunFailure>,
    pub partial: bool,
    pub wall_time_secs: f64,
}

impl EvalReport {
    pub fn loss_curves(&self) -> Vec<&[f64]> {
        self.runs
            .iter()
            .filter_map(|r| r.loss_curve.as_deref())
            .collect()
    }

    /// Writes `report.json` and, for learned methods, `loss_curves.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let file = File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        if self.runs.iter().any(|r| r.loss_curve.is_some()) {
            let mut out = BufWriter::new(File::create(dir.join("loss_curves.csv"))?);
            writeln!(out, "run,epoch,train_rmse")?;
            for run in &self.runs {
                for (epoch, v) in run.loss_curve.iter().flatten().enumerate() {
                    writeln!(out, "{},{},{}", run.repeat, epoch + 1, v)?;
                }
            }
            out.flush()?;
        }
        Ok(())
    }
}

/// Test links of one repeat, by original node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub repeat: usize,
    pub seed: u64,
    pub train_ratio: f64,
    pub test_links: Vec<(String, String)>,
}

pub fn split_manifests(g: &WeightedGraph, cfg: &ExperimentConfig) -> Result<Vec<SplitManifest>> {
    let spec = cfg.split_spec();
    (0..cfg.repeats)
        .map(|r| {
            let split = spec.split(g, r)?;
            Ok(SplitManifest {
                repeat: r,
                seed: split.seed,
                train_ratio: split.train_ratio,
                test_links: split
                    .test_edges
                    .iter()
                    .map(|e| (g.label(e.u).to_owned(), g.label(e.v).to_owned()))
                    .collect(),
            })
        })
        .collect()
}

/// Runs every repeat on a normalized graph. A failing repeat is recorded and
/// the remaining repeats still run.
pub fn run_experiment_on_graph(g: &WeightedGraph, cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in 0..cfg.repeats {
        match run_repeat(g, cfg, r) {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(RunFailure {
                repeat: r,
                error: e.to_string(),
            }),
        }
    }
    let per_run_rmse: Vec<f64> = runs.iter().map(|r| r.rmse).collect();
    Ok(EvalReport {
        method: cfg.method,
        config: cfg.clone(),
        epochs: cfg.resolved_epochs(),
        graph: GraphSummary {
            nodes: g.node_count(),
            edges: g.edge_count(),
        },
        mean: mean(&per_run_rmse),
        std: sample_std(&per_run_rmse),
        per_run_rmse,
        runs,
        partial: !failures.is_empty(),
        failures,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn write_side_files(g: &WeightedGraph, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("id_map.json"))?), &g.id_map())?;
    serde_json::to_writer(
        BufWriter::new(File::create(dir.join("splits.json"))?),
        &split_manifests(g, cfg)?,
    )?;
    Ok(())
}

/// Loads the dataset named in `cfg`, runs it, and persists the report when
/// `cfg.output_path` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let g = load_dataset(&cfg.dataset_path, cfg.dup_policy)?;
    let report = run_experiment_on_graph(&g, cfg)?;
    if let Some(dir) = &cfg.output_path {
        write_side_files(&g, cfg, dir)?;
        report.write_to(dir)?;
    }
    Ok(report)
}

/// Weighted-WL vs random labeling on identical splits and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub weighted: EvalReport,
    pub random: EvalReport,
    /// `random.mean - weighted.mean`; positive favors the weighted ordering.
    pub mean_delta: f64,
    /// Per repeat, matched by repeat index.
    pub per_run_delta: Vec<f64>,
}

pub fn run_ablation_on_graph(g: &WeightedGraph, cfg: &ExperimentConfig) -> Result<PairedReport> {
    let weighted = run_experiment_on_graph(
        g,
        &ExperimentConfig {
            method: Method::Lglwp,
            ..cfg.clone()
        },
    )?;
    let random = run_experiment_on_graph(
        g,
        &ExperimentConfig {
            method: Method::LglwpRandomLabel,
            ..cfg.clone()
        },
    )?;
    let per_run_delta = weighted
        .runs
        .iter()
        .filter_map(|w| {
            random
                .runs
                .iter()
                .find(|r| r.repeat == w.repeat)
                .map(|r| r.rmse - w.rmse)
        })
        .collect();
    Ok(PairedReport {
        mean_delta: random.mean - weighted.mean,
        per_run_delta,
        weighted,
        random,
    })
}

/// Ablation from a dataset file. Reports land in `weighted/` and `random/`
/// under the output directory, plus `ablation.json`.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<PairedReport> {
    cfg.validate()?;
    let g = load_dataset(&cfg.dataset_path, cfg.dup_policy)?;
    let paired = run_ablation_on_graph(&g, cfg)?;
    if let Some(dir) = &cfg.output_path {
        write_side_files(&g, cfg, dir)?;
        paired.weighted.write_to(&dir.join("weighted"))?;
        paired.random.write_to(&dir.join("random"))?;
        let file = File::create(dir.join("ablation.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &paired)?;
    }
    Ok(paired)
}
