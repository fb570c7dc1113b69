//! Visibility of a candidate document inside a cited answer.
//!
//! `word` is the attributed word mass, `pos` the position-decayed citation
//! mass and `overall` their product form. A sentence citing several
//! candidates splits its contribution evenly among them.

use serde::{Deserialize, Serialize};

use crate::answer::CitedAnswer;
use crate::error::{Error, Result};

/// Fraction of the best score a strategy must reach to count as near-optimal.
pub const NEAR_OPTIMAL_FRACTION: f64 = 0.55;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpressionScores {
    pub word: f64,
    pub pos: f64,
    pub overall: f64,
}

/// Attention decay for sentence `i` of an answer with `len` sentences.
pub fn position_weight(i: usize, len: usize) -> f64 {
    assert!(i < len, "sentence index {i} out of range for answer of length {len}");
    if len == 1 {
        1.0
    } else {
        (-(i as f64) / (len as f64 - 1.0)).exp()
    }
}

/// Scores for the candidate with 1-based citation index `target`.
pub fn compute_impressions(answer: &CitedAnswer, target: usize) -> ImpressionScores {
    let len = answer.len();
    let mut scores = ImpressionScores::default();
    for (i, s) in answer.sentences.iter().enumerate() {
        if !s.citations.contains(&target) {
            continue;
        }
        let share = 1.0 / s.citations.len() as f64;
        let w = position_weight(i, len);
        let wc = s.word_count as f64;
        scores.word += wc * share;
        scores.pos += w * share;
        scores.overall += wc * w * share;
    }
    scores
}

/// Scores for every candidate `1..=n`, in index order.
pub fn compute_all_impressions(answer: &CitedAnswer, n: usize) -> Vec<ImpressionScores> {
    (1..=n).map(|j| compute_impressions(answer, j)).collect()
}

/// Rescales each metric to a percentage share of the candidate-set total.
/// Metrics whose total is zero stay zero.
pub fn normalize_shares(scores: &[ImpressionScores]) -> Vec<ImpressionScores> {
    let total = scores.iter().fold(ImpressionScores::default(), |acc, s| ImpressionScores {
        word: acc.word + s.word,
        pos: acc.pos + s.pos,
        overall: acc.overall + s.overall,
    });
    let share = |v: f64, t: f64| if t > 0.0 { 100.0 * v / t } else { 0.0 };
    scores
        .iter()
        .map(|s| ImpressionScores {
            word: share(s.word, total.word),
            pos: share(s.pos, total.pos),
            overall: share(s.overall, total.overall),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub max_gain: f64,
    /// Share of strategies that are NOT near-optimal.
    pub sensitivity: f64,
}

/// How few strategies come close to the best one on an instance.
pub fn sensitivity_profile(overall_scores: &[f64]) -> Result<SensitivityProfile> {
    if overall_scores.is_empty() {
        return Err(Error::Validation("sensitivity needs at least one score".into()));
    }
    if let Some(bad) = overall_scores.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Validation(format!("score {bad} is not a finite non-negative value")));
    }
    let best = overall_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == 0.0 {
        return Ok(SensitivityProfile {
            max_gain: 0.0,
            sensitivity: 0.0,
        });
    }
    let threshold = NEAR_OPTIMAL_FRACTION * best;
    let near = overall_scores.iter().filter(|&&r| r >= threshold).count();
    Ok(SensitivityProfile {
        max_gain: best,
        sensitivity: 1.0 - near as f64 / overall_scores.len() as f64,
    })
}
