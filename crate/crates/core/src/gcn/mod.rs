//! Dense graph convolutional regressor over line graphs.
//!
//! Three propagation layers `Z' = relu(Â Z W)` with `Â = D̃^-1/2 (A + I) D̃^-1/2`,
//! a read-out that concatenates every layer's row for the target line node,
//! then `fc1 -> relu -> fc2 -> logistic`. Gradients are hand-derived
//! reverse-mode passes over the cached forward activations.

mod gradcheck;
mod params;
mod train;

pub use gradcheck::{gradient_check, gradient_check_suite, GradCheckOptions, GradCheckReport};
pub use params::{Checkpoint, Gradients, ModelParams, ModelShape};
pub use train::{predict, train, OptimizerKind, TrainConfig, TrainOutcome};

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::line_graph::LineGraphSample;

/// `D̃^-1/2 (A + I) D̃^-1/2` for a binary symmetric adjacency with empty diagonal.
pub fn normalize_adjacency(adjacency: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = adjacency.dim();
    if n != m {
        return Err(Error::Contract(format!("adjacency is {n}x{m}, not square")));
    }
    for i in 0..n {
        if adjacency[[i, i]] != 0.0 {
            return Err(Error::Contract(format!("adjacency has a self-loop at {i}")));
        }
        for j in (i + 1)..n {
            if adjacency[[i, j]] != adjacency[[j, i]] {
                return Err(Error::Contract("adjacency is not symmetric".into()));
            }
        }
    }
    let mut hat = adjacency.clone();
    hat.diag_mut().fill(1.0);
    let inv_sqrt: Array1<f64> = hat.sum_axis(Axis(1)).mapv(|d| 1.0 / d.sqrt());
    for ((i, j), x) in hat.indexed_iter_mut() {
        *x *= inv_sqrt[i] * inv_sqrt[j];
    }
    Ok(hat)
}

/// A line-graph sample with its propagation matrix precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub hat_a: Array2<f64>,
    pub features: Array2<f64>,
    pub target_index: usize,
    pub label: Option<f64>,
}

impl GraphInput {
    pub fn from_sample(sample: &LineGraphSample) -> Result<Self> {
        Ok(GraphInput {
            hat_a: normalize_adjacency(&sample.adjacency)?,
            features: sample.features.clone(),
            target_index: sample.target_index,
            label: sample.label,
        })
    }

    pub fn n_lg(&self) -> usize {
        self.hat_a.nrows()
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `Â Z_k` for every full layer; for the last layer only the target row.
    propagated: Vec<Array2<f64>>,
    /// Pre-activations `Â Z_k W_k`; last layer holds only the target row.
    pre: Vec<Array2<f64>>,
    readout: Array1<f64>,
    fc1_pre: Array1<f64>,
    fc1_out: Array1<f64>,
    /// Final logit before the logistic squash.
    pub logit: f64,
    pub prediction: f64,
    target: usize,
}

impl ForwardCache {
    /// Post-activation output of layer `k` at the target line node.
    pub fn layer_target_row(&self, k: usize) -> Array1<f64> {
        let row = if k + 1 == self.pre.len() { 0 } else { self.target };
        self.pre[k].row(row).mapv(relu)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_input(input: &GraphInput, params: &ModelParams) -> Result<()> {
    let n = input.n_lg();
    if n == 0 || input.features.nrows() != n || input.target_index >= n {
        return Err(Error::Contract("malformed graph input".into()));
    }
    if input.features.ncols() != params.shape().input_dim {
        return Err(Error::Contract(format!(
            "feature width {} does not match model input {}",
            input.features.ncols(),
            params.shape().input_dim
        )));
    }
    Ok(())
}

/// Runs the network on one sample.
pub fn forward(input: &GraphInput, params: &ModelParams) -> Result<ForwardCache> {
    check_input(input, params)?;
    let t = input.target_index;
    let layers = params.conv.len();
    let a = &input.hat_a;

    let mut propagated = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    let mut z = input.features.clone();
    for (k, w) in params.conv.iter().enumerate() {
        if k + 1 < layers {
            let az = a.dot(&z);
            let p = az.dot(w);
            z = p.mapv(relu);
            propagated.push(az);
            pre.push(p);
        } else {
            let az_t = a.row(t).dot(&z).insert_axis(Axis(0));
            let p_t = az_t.dot(w);
            propagated.push(az_t);
            pre.push(p_t);
        }
    }

    let hidden = params.shape().hidden;
    let mut readout = Array1::zeros(layers * hidden);
    for (k, p) in pre.iter().enumerate() {
        let row = if k + 1 < layers { p.row(t) } else { p.row(0) };
        readout
            .slice_mut(s![k * hidden..(k + 1) * hidden])
            .assign(&row.mapv(relu));
    }
    let fc1_pre = readout.dot(&params.fc1_w) + &params.fc1_b;
    let fc1_out = fc1_pre.mapv(relu);
    let logit = fc1_out.dot(&params.fc2_w.column(0)) + params.fc2_b[0];
    Ok(ForwardCache {
        propagated,
        pre,
        readout,
        fc1_pre,
        fc1_out,
        logit,
        prediction: sigmoid(logit),
        target: t,
    })
}

/// Squared error `(ŷ - y)²` of one sample.
pub fn sample_loss(input: &GraphInput, params: &ModelParams, label: f64) -> Result<f64> {
    let y = forward(input, params)?.prediction;
    Ok((y - label) * (y - label))
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Exact gradient of `(ŷ - label)²` with respect to every parameter.
pub fn backward(
    input: &GraphInput,
    params: &ModelParams,
    cache: &ForwardCache,
    label: f64,
) -> Gradients {
    let shape = params.shape();
    let hidden = shape.hidden;
    let layers = params.conv.len();
    let t = cache.target;
    let a = &input.hat_a;
    let mut grads = ModelParams::zeros(&shape);

    let y = cache.prediction;
    let d_logit = 2.0 * (y - label) * y * (1.0 - y);
    grads.fc2_b[0] = d_logit;
    grads
        .fc2_w
        .column_mut(0)
        .assign(&cache.fc1_out.mapv(|r| r * d_logit));
    let d_fc1_pre: Array1<f64> = params
        .fc2_w
        .column(0)
        .iter()
        .zip(&cache.fc1_pre)
        .map(|(&w, &q)| if q > 0.0 { w * d_logit } else { 0.0 })
        .collect();
    grads.fc1_b.assign(&d_fc1_pre);
    grads.fc1_w = outer(cache.readout.view(), d_fc1_pre.view());
    let d_readout = params.fc1_w.dot(&d_fc1_pre);

    // Last layer: only the target row exists.
    let last = layers - 1;
    let d_pre_last: Array1<f64> = d_readout
        .slice(s![last * hidden..])
        .iter()
        .zip(cache.pre[last].row(0))
        .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
        .collect();
    grads.conv[last] = outer(cache.propagated[last].row(0), d_pre_last.view());
    if last == 0 {
        return grads;
    }
    let back = params.conv[last].dot(&d_pre_last);
    let mut d_z = outer(a.row(t), back.view());

    for k in (0..last).rev() {
        let mut g = d_z;
        {
            let mut row = g.row_mut(t);
            row += &d_readout.slice(s![k * hidden..(k + 1) * hidden]);
        }
        let d_pre = g * cache.pre[k].mapv(|p| if p > 0.0 { 1.0 } else { 0.0 });
        grads.conv[k] = cache.propagated[k].t().dot(&d_pre).as_standard_layout().into_owned();
        if k == 0 {
            break;
        }
        d_z = a.dot(&d_pre.dot(&params.conv[k].t()));
    }
    grads
}

/// Forward and backward in one call; returns the squared error and gradients.
pub fn loss_and_gradients(
    input: &GraphInput,
    params: &ModelParams,
    label: f64,
) -> Result<(f64, Gradients)> {
    let cache = forward(input, params)?;
    let err = cache.prediction - label;
    Ok((err * err, backward(input, params, &cache, label)))
}
