use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ModelShape};
use super::{forward, loss_and_gradients, GraphInput};
use crate::error::{Error, Result};
use crate::metrics::rmse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden: usize,
    pub layers: usize,
    pub fc_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden: 32,
            layers: 3,
            fc_hidden: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.layers == 0 || self.hidden == 0 || self.fc_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn shape(&self, input_dim: usize) -> ModelShape {
        ModelShape {
            input_dim,
            hidden: self.hidden,
            layers: self.layers,
            fc_hidden: self.fc_hidden,
        }
    }
}

enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: i32,
        moments: Box<(ModelParams, ModelParams)>,
    },
}

impl Optimizer {
    fn new(cfg: &TrainConfig, shape: &ModelShape) -> Self {
        match cfg.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd {
                lr: cfg.learning_rate,
            },
            OptimizerKind::Adam => Optimizer::Adam {
                lr: cfg.learning_rate,
                beta1: cfg.beta1,
                beta2: cfg.beta2,
                epsilon: cfg.epsilon,
                step: 0,
                moments: Box::new((ModelParams::zeros(shape), ModelParams::zeros(shape))),
            },
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        match self {
            Optimizer::Sgd { lr } => params.add_scaled(grads, -*lr),
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                step,
                moments,
            } => {
                let (m, v) = &mut **moments;
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                let tensors = params
                    .slices_mut()
                    .into_iter()
                    .zip(grads.slices())
                    .zip(m.slices_mut())
                    .zip(v.slices_mut());
                for (((p, g), m), v) in tensors {
                    for i in 0..p.len() {
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= *lr * m_hat / (v_hat.sqrt() + *epsilon);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Training RMSE over all samples, evaluated after each epoch.
    pub loss_curve: Vec<f64>,
    /// Training RMSE of the freshly initialized model.
    pub initial_rmse: f64,
}

fn labels(samples: &[GraphInput]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::Contract("training sample has no label".into()))
        })
        .collect()
}

/// Mini-batch training on squared error.
///
/// Per-sample gradients may be computed in parallel, but they are summed
/// in batch order, so results depend only on the data and `cfg.seed`.
pub fn train(samples: &[GraphInput], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let first = samples
        .first()
        .ok_or_else(|| Error::Contract("no training samples".into()))?;
    let truth = labels(samples)?;
    let shape = cfg.shape(first.features.ncols());
    let mut params = ModelParams::glorot(&shape, cfg.seed);
    let mut optimizer = Optimizer::new(cfg, &shape);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let initial_rmse = rmse(&predict(samples, &params)?, &truth)?;
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let per_sample: Vec<(f64, ModelParams)> = batch
                .par_iter()
                .map(|&i| loss_and_gradients(&samples[i], &params, truth[i]))
                .collect::<Result<_>>()?;
            let mut total = ModelParams::zeros(&shape);
            let mut loss = 0.0;
            for (l, g) in &per_sample {
                loss += l;
                total.add_scaled(g, 1.0);
            }
            let scale = 1.0 / batch.len() as f64;
            loss *= scale;
            if !loss.is_finite() || !total.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let mut mean = ModelParams::zeros(&shape);
            mean.add_scaled(&total, scale);
            optimizer.step(&mut params, &mean);
        }
        let epoch_rmse = rmse(&predict(samples, &params)?, &truth)?;
        if !epoch_rmse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: epoch_rmse,
            });
        }
        loss_curve.push(epoch_rmse);
    }

    Ok(TrainOutcome {
        params,
        loss_curve,
        initial_rmse,
    })
}

/// One prediction in (0, 1) per sample. Does not touch `params`.
pub fn predict(samples: &[GraphInput], params: &ModelParams) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|s| forward(s, params).map(|c| c.prediction))
        .collect()
}
