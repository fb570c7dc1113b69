//! Two-layer value head over hashed features, with a lazy Adam optimizer.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{encode, encode_context, encode_strategy, FeatureConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::genotype::Strategy;
use crate::types::Context;

pub const CRITIC_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub features: FeatureConfig,
    pub hidden: usize,
    /// Multiplier on the head output, so raw impression gains (tens of
    /// words) are reachable without huge weights.
    pub output_scale: f64,
    /// Half-width of the uniform first-layer initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            features: FeatureConfig::default(),
            hidden: 64,
            output_scale: 10.0,
            init_scale: 0.2,
            seed: 0,
        }
    }
}

/// Which parameters a gradient step may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Output layer only; the first layer is frozen.
    Warmup,
    /// Both layers.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Gradient of a scalar loss with respect to the model parameters. The
/// first-layer part is stored per touched feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: BTreeMap<usize, Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    pub fn zeros(hidden: usize) -> Self {
        Gradients {
            w1: BTreeMap::new(),
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn first_layer_is_zero(&self) -> bool {
        self.w1.values().flatten().all(|g| *g == 0.0) && self.b1.iter().all(|g| *g == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.values().flatten().all(|g| g.is_finite())
            && self.b1.iter().all(|g| g.is_finite())
            && self.w2.iter().all(|g| g.is_finite())
            && self.b2.is_finite()
    }
}

/// Hidden activations kept from a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticModel {
    pub format_version: u32,
    pub config: CriticConfig,
    /// Column-major by feature: `w1[j * hidden + h]`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    adam_w1: Moments,
    adam_b1: Moments,
    adam_w2: Moments,
    adam_b2: Moments,
    pub steps: u64,
}

impl CriticModel {
    /// Random first layer, zero output layer (every score starts at 0).
    pub fn new(config: CriticConfig) -> Result<Self> {
        if config.hidden == 0 {
            return Err(Error::Config {
                key: "critic_hidden".into(),
                message: "hidden width must be at least 1".into(),
            });
        }
        if config.features.hash_dim == 0 || config.features.ngram == 0 {
            return Err(Error::Config {
                key: "critic_hash_dim".into(),
                message: "hash dimension and n-gram size must be positive".into(),
            });
        }
        let d = config.features.dim();
        let h = config.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let a = config.init_scale;
        let w1 = (0..d * h).map(|_| rng.gen_range(-a..=a)).collect();
        Ok(CriticModel {
            format_version: CRITIC_FORMAT_VERSION,
            w1,
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
            adam_w1: Moments::zeros(d * h),
            adam_b1: Moments::zeros(h),
            adam_w2: Moments::zeros(h),
            adam_b2: Moments::zeros(1),
            steps: 0,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.features.dim()
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn forward(&self, x: &FeatureVector) -> Forward {
        let h = self.config.hidden;
        let mut pre = self.b1.clone();
        for (j, v) in x.iter() {
            let col = &self.w1[j * h..(j + 1) * h];
            for (p, w) in pre.iter_mut().zip(col) {
                *p += v * w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|p| p.tanh()).collect();
        let z: f64 = hidden.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
        Forward {
            hidden,
            output: self.config.output_scale * z,
        }
    }

    pub fn score_features(&self, x: &FeatureVector) -> f64 {
        self.forward(x).output
    }

    /// Predicted gain of `s` on context `x`.
    pub fn score(&self, ctx: &Context, s: &Strategy) -> f64 {
        self.score_features(&encode(&self.config.features, ctx, s))
    }

    /// Scores many strategies on one context, encoding the context once.
    pub fn score_many(&self, ctx: &Context, strategies: &[Strategy]) -> Vec<f64> {
        let base = encode_context(&self.config.features, ctx);
        strategies
            .iter()
            .map(|s| self.score_features(&base.merge(&encode_strategy(&self.config.features, s))))
            .collect()
    }

    pub fn featurize(&self, ctx: &Context, s: &Strategy) -> FeatureVector {
        encode(&self.config.features, ctx, s)
    }

    /// Accumulates `d_out · ∂output/∂θ` into `grads`.
    pub fn backward(
        &self,
        x: &FeatureVector,
        fwd: &Forward,
        d_out: f64,
        stage: Stage,
        grads: &mut Gradients,
    ) {
        let h = self.config.hidden;
        let dz = d_out * self.config.output_scale;
        for k in 0..h {
            grads.w2[k] += dz * fwd.hidden[k];
        }
        grads.b2 += dz;
        if stage == Stage::Warmup {
            return;
        }
        let dpre: Vec<f64> = (0..h)
            .map(|k| dz * self.w2[k] * (1.0 - fwd.hidden[k] * fwd.hidden[k]))
            .collect();
        for k in 0..h {
            grads.b1[k] += dpre[k];
        }
        for (j, v) in x.iter() {
            let col = grads.w1.entry(j).or_insert_with(|| vec![0.0; h]);
            for k in 0..h {
                col[k] += v * dpre[k];
            }
        }
    }

    /// One Adam step. First-layer columns absent from `grads` keep their
    /// weights and moments (lazy update).
    pub fn apply_gradients(&mut self, grads: &Gradients, adam: &AdamParams, stage: Stage) {
        if adam.lr == 0.0 {
            return;
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - adam.beta1.powi(t);
        let c2 = 1.0 - adam.beta2.powi(t);
        let step = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = adam.beta1 * *m + (1.0 - adam.beta1) * g;
            *v = adam.beta2 * *v + (1.0 - adam.beta2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *w -= adam.lr * mh / (vh.sqrt() + adam.eps);
        };
        let h = self.config.hidden;
        for k in 0..h {
            step(&mut self.w2[k], &mut self.adam_w2.m[k], &mut self.adam_w2.v[k], grads.w2[k]);
        }
        step(&mut self.b2, &mut self.adam_b2.m[0], &mut self.adam_b2.v[0], grads.b2);
        if stage == Stage::Warmup {
            return;
        }
        for k in 0..h {
            step(&mut self.b1[k], &mut self.adam_b1.m[k], &mut self.adam_b1.v[k], grads.b1[k]);
        }
        for (&j, col) in &grads.w1 {
            for k in 0..h {
                let i = j * h + k;
                step(&mut self.w1[i], &mut self.adam_w1.m[i], &mut self.adam_w1.v[i], col[k]);
            }
        }
    }

    /// Flat parameter access used by gradient checks: (w1, b1, w2, b2).
    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn param(&self, i: usize) -> f64 {
        let (n1, n2, n3) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < n1 {
            self.w1[i]
        } else if i < n1 + n2 {
            self.b1[i - n1]
        } else if i < n1 + n2 + n3 {
            self.w2[i - n1 - n2]
        } else {
            self.b2
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        let (n1, n2, n3) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < n1 {
            self.w1[i] = value
        } else if i < n1 + n2 {
            self.b1[i - n1] = value
        } else if i < n1 + n2 + n3 {
            self.w2[i - n1 - n2] = value
        } else {
            self.b2 = value
        }
    }

    /// Gradient entry for flat parameter `i`.
    pub fn grad_entry(&self, grads: &Gradients, i: usize) -> f64 {
        let h = self.config.hidden;
        let (n1, n2, n3) = (self.w1.len(), self.b1.len(), self.w2.len());
        if i < n1 {
            grads.w1.get(&(i / h)).map(|c| c[i % h]).unwrap_or(0.0)
        } else if i < n1 + n2 {
            grads.b1[i - n1]
        } else if i < n1 + n2 + n3 {
            grads.w2[i - n1 - n2]
        } else {
            grads.b2
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: CriticModel = serde_json::from_str(&text)?;
        if m.format_version != CRITIC_FORMAT_VERSION {
            return Err(Error::Format {
                what: "critic",
                line: 1,
                message: format!("unsupported format version {}", m.format_version),
            });
        }
        let d = m.config.features.dim();
        let h = m.config.hidden;
        if m.w1.len() != d * h || m.b1.len() != h || m.w2.len() != h {
            return Err(Error::Format {
                what: "critic",
                line: 1,
                message: "weight shapes do not match the stored configuration".into(),
            });
        }
        Ok(m)
    }
}
