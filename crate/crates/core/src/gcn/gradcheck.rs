use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::params::{ModelParams, ModelShape};
use super::{backward, forward, sample_loss, GraphInput};
use crate::error::Result;
use crate::graph::{DupPolicy, WeightedGraph};
use crate::labeling::{build_feature_matrix, order_nodes_wwl, DistanceMode};
use crate::line_graph::to_line_graph;
use crate::subgraph::{extract_enclosing_subgraph, ExtractOptions};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Largest relative error among entries above the absolute floor.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Entries that failed at the base step but passed at a tenth of it:
    /// the wider stencil straddled a rectifier kink.
    pub refined: usize,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn central_difference(
    input: &GraphInput,
    probe: &mut ModelParams,
    label: f64,
    tensor: usize,
    index: usize,
    step: f64,
) -> Result<f64> {
    let original = probe.slices()[tensor][index];
    probe.slices_mut()[tensor][index] = original + step;
    let up = sample_loss(input, probe, label)?;
    probe.slices_mut()[tensor][index] = original - step;
    let down = sample_loss(input, probe, label)?;
    probe.slices_mut()[tensor][index] = original;
    Ok((up - down) / (2.0 * step))
}

/// `(absolute, relative)` error; relative is 0 when absolute is under the floor.
fn errors(numeric: f64, exact: f64, abs_floor: f64) -> (f64, f64) {
    let abs = (numeric - exact).abs();
    if abs <= abs_floor {
        (abs, 0.0)
    } else {
        (abs, abs / numeric.abs().max(exact.abs()))
    }
}

/// Checks every parameter's analytic gradient against
/// `(L(θ + h) − L(θ − h)) / 2h`. An entry passes when its absolute error is
/// at most `abs_floor` or its relative error is at most `rel_tol`. Failing
/// entries are probed again with `h / 10` before they count as failures.
pub fn gradient_check(
    input: &GraphInput,
    params: &ModelParams,
    label: f64,
    step: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<GradCheckReport> {
    let cache = forward(input, params)?;
    let analytic = backward(input, params, &cache, label);
    let exact_slices = analytic.slices();

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        refined: 0,
        failures: 0,
    };
    for (t, exact_tensor) in exact_slices.iter().enumerate() {
        for (i, &exact) in exact_tensor.iter().enumerate() {
            let numeric = central_difference(input, &mut probe, label, t, i, step)?;
            let (mut abs, mut rel) = errors(numeric, exact, abs_floor);
            if rel > rel_tol {
                let finer = central_difference(input, &mut probe, label, t, i, step / 10.0)?;
                let (a, r) = errors(finer, exact, abs_floor);
                if r <= rel_tol {
                    report.refined += 1;
                }
                (abs, rel) = (a, r);
            }
            report.checked += 1;
            report.max_absolute_error = report.max_absolute_error.max(abs);
            report.max_relative_error = report.max_relative_error.max(rel);
            if rel > rel_tol {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

/// Tolerances for [`gradient_check_suite`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradCheckOptions {
    pub draws: usize,
    pub seed: u64,
    pub max_nodes: usize,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            draws: 20,
            seed: 0,
            max_nodes: 10,
            step: 1e-5,
            rel_tol: 1e-4,
            abs_floor: 1e-7,
        }
    }
}

/// A random link sample from an Erdős–Rényi graph, with a random label.
fn random_draw(rng: &mut ChaCha8Rng, max_nodes: usize) -> Result<(GraphInput, f64)> {
    loop {
        let n = rng.gen_range(3..=max_nodes + 4);
        let p = rng.gen_range(0.25..0.7);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(p) {
                    edges.push((i, j, rng.gen_range(0.01..0.99)));
                }
            }
        }
        let g = WeightedGraph::from_edges(n, edges, DupPolicy::Max)?;
        if g.edge_count() == 0 {
            continue;
        }
        let e = g.edges()[rng.gen_range(0..g.edge_count())];
        let opts = ExtractOptions { hop: 1, max_nodes };
        let sg = extract_enclosing_subgraph(&g, e.u, e.v, &opts, rng.gen())?;
        let ord = order_nodes_wwl(&sg, DistanceMode::Weight);
        let fm = build_feature_matrix(&sg, &ord, max_nodes)?;
        let input = GraphInput::from_sample(&to_line_graph(&sg, &fm, &ord)?)?;
        return Ok((input, rng.gen_range(0.05..0.95)));
    }
}

/// Runs [`gradient_check`] on `draws` random (sample, parameters, label)
/// triples. Biases are perturbed away from zero so they are exercised too.
pub fn gradient_check_suite(opts: &GradCheckOptions) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shape = ModelShape::for_max_nodes(opts.max_nodes);
    (0..opts.draws)
        .map(|_| {
            let (input, label) = random_draw(&mut rng, opts.max_nodes)?;
            let mut params = ModelParams::glorot(&shape, rng.gen());
            params.fc1_b.iter_mut().for_each(|b| *b = rng.gen_range(-0.1..0.1));
            params.fc2_b[0] = rng.gen_range(-0.5..0.5);
            gradient_check(&input, &params, label, opts.step, opts.rel_tol, opts.abs_floor)
        })
        .collect()
}
