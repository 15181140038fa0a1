use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths of the regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub fc_hidden: usize,
}

impl ModelShape {
    /// Defaults for a given subgraph budget: features are two adjacency rows.
    pub fn for_max_nodes(max_nodes: usize) -> Self {
        ModelShape {
            input_dim: 2 * max_nodes,
            hidden: 32,
            layers: 3,
            fc_hidden: 16,
        }
    }

    pub fn readout_dim(&self) -> usize {
        self.hidden * self.layers
    }
}

/// Trainable tensors. Also used to hold gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `conv[k]` maps layer `k` input width to `hidden`.
    pub conv: Vec<Array2<f64>>,
    pub fc1_w: Array2<f64>,
    pub fc1_b: Array1<f64>,
    pub fc2_w: Array2<f64>,
    pub fc2_b: Array1<f64>,
}

pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(shape: &ModelShape) -> Self {
        let conv = (0..shape.layers)
            .map(|k| {
                let fan_in = if k == 0 { shape.input_dim } else { shape.hidden };
                Array2::zeros((fan_in, shape.hidden))
            })
            .collect();
        ModelParams {
            conv,
            fc1_w: Array2::zeros((shape.readout_dim(), shape.fc_hidden)),
            fc1_b: Array1::zeros(shape.fc_hidden),
            fc2_w: Array2::zeros((shape.fc_hidden, 1)),
            fc2_b: Array1::zeros(1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(shape: &ModelShape, seed: u64) -> Self {
        let mut params = Self::zeros(shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |m: &mut Array2<f64>| {
            let (fan_in, fan_out) = m.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            m.iter_mut().for_each(|x| *x = dist.sample(&mut rng));
        };
        for w in &mut params.conv {
            fill(w);
        }
        fill(&mut params.fc1_w);
        fill(&mut params.fc2_w);
        params
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.conv[0].nrows(),
            hidden: self.conv[0].ncols(),
            layers: self.conv.len(),
            fc_hidden: self.fc1_b.len(),
        }
    }

    fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.conv.len()).map(|k| format!("conv{k}")).collect();
        names.extend(["fc1_w", "fc1_b", "fc2_w", "fc2_b"].map(String::from));
        names
    }

    /// Every tensor as a flat slice, in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self
            .conv
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect();
        out.push(self.fc1_w.as_slice().expect("standard layout"));
        out.push(self.fc1_b.as_slice().expect("standard layout"));
        out.push(self.fc2_w.as_slice().expect("standard layout"));
        out.push(self.fc2_b.as_slice().expect("standard layout"));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .conv
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.fc1_w.as_slice_mut().expect("standard layout"));
        out.push(self.fc1_b.as_slice_mut().expect("standard layout"));
        out.push(self.fc2_w.as_slice_mut().expect("standard layout"));
        out.push(self.fc2_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

/// Tensor with its name and shape, for checkpoint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDump {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// JSON model checkpoint: shapes, metadata and flat row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub shape: ModelShape,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorDump>,
}

pub const CHECKPOINT_FORMAT: &str = "lglwp-gcn/1";

impl Checkpoint {
    pub fn new(params: &ModelParams, seed: u64, config: serde_json::Value) -> Self {
        let dims = |p: &ModelParams| -> Vec<Vec<usize>> {
            let mut d: Vec<Vec<usize>> = p.conv.iter().map(|w| w.shape().to_vec()).collect();
            d.push(p.fc1_w.shape().to_vec());
            d.push(p.fc1_b.shape().to_vec());
            d.push(p.fc2_w.shape().to_vec());
            d.push(p.fc2_b.shape().to_vec());
            d
        };
        let tensors = params
            .names()
            .into_iter()
            .zip(dims(params))
            .zip(params.slices())
            .map(|((name, shape), data)| TensorDump {
                name,
                shape,
                data: data.to_vec(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            shape: params.shape(),
            seed,
            config,
            tensors,
        }
    }

    /// Rebuilds parameters, validating every tensor shape.
    pub fn params(&self) -> Result<ModelParams> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Contract(format!("unknown checkpoint format `{}`", self.format)));
        }
        let mut params = ModelParams::zeros(&self.shape);
        let names = params.names();
        if self.tensors.len() != names.len() {
            return Err(Error::Contract("checkpoint has the wrong number of tensors".into()));
        }
        for ((dst, dump), name) in params.slices_mut().into_iter().zip(&self.tensors).zip(names) {
            if dump.name != name || dump.data.len() != dst.len() {
                return Err(Error::Contract(format!("tensor `{}` does not fit `{name}`", dump.name)));
            }
            dst.copy_from_slice(&dump.data);
        }
        Ok(params)
    }
}
