//! Weighted common-neighbor heuristics with a fitted linear read-out.
//!
//! For a common neighbor `z` of `u` and `v`, each heuristic sums
//! `w(u,z) + w(z,v)`, optionally divided by `log(1 + s(z))` (Adamic-Adar)
//! or `s(z)` (resource allocation), where `s(z)` is the node strength.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Wcn,
    Waa,
    Wra,
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wcn" => Ok(Heuristic::Wcn),
            "waa" => Ok(Heuristic::Waa),
            "wra" => Ok(Heuristic::Wra),
            other => Err(Error::Config(format!("unknown heuristic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicScore {
    pub link: (usize, usize),
    pub score: f64,
}

/// Calls `f(w(u,z), w(z,v), z)` for every common neighbor `z`, merging the
/// two sorted adjacency lists.
fn for_common_neighbors(g: &WeightedGraph, u: usize, v: usize, mut f: impl FnMut(f64, f64, usize)) {
    let (a, b) = (g.neighbors(u), g.neighbors(v));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let z = a[i].0;
                if z != u && z != v {
                    f(a[i].1, b[j].1, z);
                }
                i += 1;
                j += 1;
            }
        }
    }
}

fn check_nodes(g: &WeightedGraph, u: usize, v: usize) -> Result<()> {
    for x in [u, v] {
        if !g.contains_node(x) {
            return Err(Error::MissingNode(x));
        }
    }
    Ok(())
}

pub fn wcn(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    check_nodes(g, u, v)?;
    let mut total = 0.0;
    for_common_neighbors(g, u, v, |a, b, _| total += a + b);
    Ok(total)
}

pub fn waa(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    check_nodes(g, u, v)?;
    let mut total = 0.0;
    for_common_neighbors(g, u, v, |a, b, z| total += (a + b) / g.strength(z).ln_1p());
    Ok(total)
}

pub fn wra(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    check_nodes(g, u, v)?;
    let mut total = 0.0;
    for_common_neighbors(g, u, v, |a, b, z| total += (a + b) / g.strength(z));
    Ok(total)
}

pub fn score(g: &WeightedGraph, h: Heuristic, u: usize, v: usize) -> Result<HeuristicScore> {
    let score = match h {
        Heuristic::Wcn => wcn(g, u, v)?,
        Heuristic::Waa => waa(g, u, v)?,
        Heuristic::Wra => wra(g, u, v)?,
    };
    Ok(HeuristicScore {
        link: (u, v),
        score,
    })
}

/// Clamp margin keeping calibrated predictions strictly inside (0, 1).
pub const CALIBRATION_EPS: f64 = 1e-6;

/// Affine least-squares fit `weight ≈ slope * score + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
}

impl Calibration {
    /// Falls back to the mean weight (zero slope) when all scores coincide.
    pub fn fit(train_pairs: &[(f64, f64)]) -> Result<Self> {
        if train_pairs.is_empty() {
            return Err(Error::Contract("calibration needs training pairs".into()));
        }
        let n = train_pairs.len() as f64;
        let mx = train_pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = train_pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = train_pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = train_pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx <= f64::EPSILON * (1.0 + mx * mx) * n {
            return Ok(Calibration {
                slope: 0.0,
                intercept: my,
            });
        }
        let slope = sxy / sxx;
        Ok(Calibration {
            slope,
            intercept: my - slope * mx,
        })
    }

    pub fn apply(&self, score: f64) -> f64 {
        (self.slope * score + self.intercept).clamp(CALIBRATION_EPS, 1.0 - CALIBRATION_EPS)
    }
}

/// Fits the score-to-weight map on `train_pairs` (score, weight) and applies
/// it to `scores`.
pub fn calibrate_and_predict(scores: &[HeuristicScore], train_pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    let cal = Calibration::fit(train_pairs)?;
    Ok(scores.iter().map(|s| cal.apply(s.score)).collect())
}
