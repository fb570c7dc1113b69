//! Hybrid objective: weighted pairwise logistic ranking plus λ·Huber regression.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::model::{CriticModel, Gradients, Stage};
use crate::error::{Error, Result};

pub const HUBER_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair {
    pub plus: usize,
    pub minus: usize,
    pub weight: f64,
}

/// Examples plus the regression targets and preference pairs that refer to
/// them by position.
#[derive(Debug, Clone, Default)]
pub struct LossBatch<'a> {
    pub features: Vec<&'a FeatureVector>,
    pub targets: Vec<(usize, f64)>,
    pub pairs: Vec<WeightedPair>,
}

impl LossBatch<'_> {
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty() && self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub pair: f64,
    pub reg: f64,
    pub total: f64,
}

/// Rank weight of a preference pair (1-based ranks).
pub fn pair_weight(rank_plus: usize, rank_minus: usize) -> f64 {
    1.0 / (rank_plus + rank_minus) as f64
}

pub fn huber(err: f64, delta: f64) -> f64 {
    let a = err.abs();
    if a <= delta {
        0.5 * err * err
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_grad(err: f64, delta: f64) -> f64 {
    err.clamp(-delta, delta)
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and its derivative with respect to each score.
pub fn loss_from_scores(
    scores: &[f64],
    targets: &[(usize, f64)],
    pairs: &[WeightedPair],
    lambda: f64,
) -> Result<(LossParts, Vec<f64>)> {
    if targets.is_empty() && pairs.is_empty() {
        return Err(Error::Validation("hybrid loss on an empty batch".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Validation(format!("lambda must be non-negative, got {lambda}")));
    }
    let mut d = vec![0.0; scores.len()];
    let mut reg = 0.0;
    if !targets.is_empty() {
        let n = targets.len() as f64;
        for &(i, y) in targets {
            let e = scores[i] - y;
            reg += huber(e, HUBER_DELTA) / n;
            d[i] += lambda * huber_grad(e, HUBER_DELTA) / n;
        }
    }
    let mut pair = 0.0;
    if !pairs.is_empty() {
        let n = pairs.len() as f64;
        for p in pairs {
            let margin = scores[p.plus] - scores[p.minus];
            pair += p.weight * softplus(-margin) / n;
            let g = -p.weight * sigmoid(-margin) / n;
            d[p.plus] += g;
            d[p.minus] -= g;
        }
    }
    Ok((
        LossParts {
            pair,
            reg,
            total: pair + lambda * reg,
        },
        d,
    ))
}

pub fn hybrid_loss(model: &CriticModel, batch: &LossBatch<'_>, lambda: f64) -> Result<LossParts> {
    let scores: Vec<f64> = batch.features.iter().map(|x| model.score_features(x)).collect();
    Ok(loss_from_scores(&scores, &batch.targets, &batch.pairs, lambda)?.0)
}

/// Loss plus parameter gradients; `Stage::Warmup` leaves first-layer
/// gradients at zero.
pub fn hybrid_loss_grad(
    model: &CriticModel,
    batch: &LossBatch<'_>,
    lambda: f64,
    stage: Stage,
) -> Result<(LossParts, Gradients)> {
    let fwd: Vec<_> = batch.features.iter().map(|x| model.forward(x)).collect();
    let scores: Vec<f64> = fwd.iter().map(|f| f.output).collect();
    let (parts, d) = loss_from_scores(&scores, &batch.targets, &batch.pairs, lambda)?;
    let mut grads = Gradients::zeros(model.hidden());
    for (i, x) in batch.features.iter().enumerate() {
        if d[i] != 0.0 {
            model.backward(x, &fwd[i], d[i], stage, &mut grads);
        }
    }
    Ok((parts, grads))
}
