//! Hashed character n-gram features for (query, document, strategy) triples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::genotype::{Descriptor, Strategy};
use crate::types::Context;
use crate::util::stable_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of hashed slots; the descriptor one-hot block follows them.
    pub hash_dim: usize,
    pub ngram: usize,
    /// Only the first `doc_head_tokens` whitespace tokens of the document are read.
    pub doc_head_tokens: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hash_dim: 4096,
            ngram: 3,
            doc_head_tokens: 512,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.hash_dim + Descriptor::one_hot_len()
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_map(map: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = map.into_iter().filter(|(_, v)| *v != 0.0).unzip();
        FeatureVector { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Sum of two vectors.
    pub fn merge(&self, other: &FeatureVector) -> FeatureVector {
        let mut map: BTreeMap<u32, f64> = self.indices.iter().copied().zip(self.values.iter().copied()).collect();
        for (i, v) in other.indices.iter().zip(&other.values) {
            *map.entry(*i).or_insert(0.0) += v;
        }
        FeatureVector::from_map(map)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] += v;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

fn hashed_segment(cfg: &FeatureConfig, namespace: &str, text: &str, map: &mut BTreeMap<u32, f64>) {
    let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    let mut local: BTreeMap<u32, f64> = BTreeMap::new();
    if padded.len() >= cfg.ngram {
        for w in padded.windows(cfg.ngram) {
            let gram: String = w.iter().collect();
            let h = stable_hash(&[namespace.as_bytes(), gram.as_bytes()]);
            *local.entry((h % cfg.hash_dim as u64) as u32).or_insert(0.0) += 1.0;
        }
    }
    let norm = local.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (k, v) in local {
            *map.entry(k).or_insert(0.0) += v / norm;
        }
    }
}

fn doc_head(text: &str, tokens: usize) -> String {
    text.split_whitespace().take(tokens).collect::<Vec<_>>().join(" ")
}

/// Features of the (query, document) part; reusable across strategies.
pub fn encode_context(cfg: &FeatureConfig, ctx: &Context) -> FeatureVector {
    let mut map = BTreeMap::new();
    hashed_segment(cfg, "q:", &ctx.query.text, &mut map);
    hashed_segment(cfg, "d:", &doc_head(&ctx.document.text, cfg.doc_head_tokens), &mut map);
    FeatureVector::from_map(map)
}

/// Features of the strategy part: hashed summary n-grams plus the
/// descriptor one-hot block.
pub fn encode_strategy(cfg: &FeatureConfig, s: &Strategy) -> FeatureVector {
    let mut map = BTreeMap::new();
    hashed_segment(cfg, "s:", &s.summary, &mut map);
    for slot in s.descriptor().one_hot_indices() {
        map.insert((cfg.hash_dim + slot) as u32, 1.0);
    }
    FeatureVector::from_map(map)
}

/// Full feature vector h(x, s).
pub fn encode(cfg: &FeatureConfig, ctx: &Context, s: &Strategy) -> FeatureVector {
    encode_context(cfg, ctx).merge(&encode_strategy(cfg, s))
}
