//! Run configuration as `key = value` lines.
//!
//! Blank lines and lines starting with `#` are ignored. Keys left out take
//! their defaults; unknown or repeated keys are errors naming the key.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::archive::ArchiveConfig;
use crate::critic::{CriticConfig, FeatureConfig, TrainConfig};
use crate::engine::dataset::SyntheticSpec;
use crate::engine::{BackendKind, RemoteParams, SimulationParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerKind {
    /// Parametric operator policy.
    Local,
    /// Chat model following the JSON-line action protocol.
    Remote,
}

impl FromStr for ProposerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "local" => Ok(ProposerKind::Local),
            "remote" => Ok(ProposerKind::Remote),
            other => Err(format!("expected `local` or `remote`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for ProposerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProposerKind::Local => "local",
            ProposerKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Co-evolution iterations T.
    pub iterations: usize,
    pub k_top: usize,
    pub k_rand: usize,
    pub parents: usize,
    pub evolver_candidates: usize,
    pub symbolic_candidates: usize,
    pub alpha_sib: f64,
    pub beta: f64,
    /// Weight of the regression term in the critic loss.
    pub lambda: f64,
    pub lambda_pnd: f64,
    pub k_c: usize,
    pub archive_capacity: usize,
    pub novelty_threshold: f64,
    pub critic_lr: f64,
    pub evolver_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub freeze_epochs: usize,
    pub replay_sample: usize,
    pub seed: u64,
    pub backend: BackendKind,
    pub proposer: ProposerKind,
    pub evolver_temperature: f64,
    /// Concurrent engine evaluations per iteration.
    pub in_flight: usize,
    /// Contexts used to label the seeds before the first iteration (0 skips).
    pub warm_start_contexts: usize,
    pub checkpoint_every: usize,
    pub critic_hidden: usize,
    pub critic_hash_dim: usize,
    pub critic_output_scale: f64,
    pub dataset_queries: usize,
    pub docs_per_query: usize,
    pub sentences_per_answer: usize,
    pub keyword_weight: f64,
    pub statistic_weight: f64,
    pub quote_weight: f64,
    pub marker_weight: f64,
    pub remote_base_url: String,
    pub remote_model: String,
    pub remote_timeout_secs: u64,
    pub remote_max_retries: u32,
    pub planner_top_k: usize,
    pub planner_max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimulationParams::default();
        let remote = RemoteParams::default();
        RunConfig {
            iterations: 100,
            k_top: 4,
            k_rand: 4,
            parents: 4,
            evolver_candidates: 8,
            symbolic_candidates: 8,
            alpha_sib: 0.8,
            beta: 1.0,
            lambda: 0.2,
            lambda_pnd: 0.3,
            k_c: 3,
            archive_capacity: 35,
            novelty_threshold: 0.9,
            critic_lr: 1e-3,
            evolver_lr: 2e-4,
            batch_size: 2,
            epochs: 2,
            freeze_epochs: 1,
            replay_sample: 64,
            seed: 0,
            backend: BackendKind::Simulated,
            proposer: ProposerKind::Local,
            evolver_temperature: 1.0,
            in_flight: 4,
            warm_start_contexts: 8,
            checkpoint_every: 10,
            critic_hidden: 64,
            critic_hash_dim: FeatureConfig::default().hash_dim,
            critic_output_scale: CriticConfig::default().output_scale,
            dataset_queries: 20,
            docs_per_query: 5,
            sentences_per_answer: sim.sentences_per_answer,
            keyword_weight: sim.keyword_overlap_w,
            statistic_weight: sim.statistic_w,
            quote_weight: sim.quote_w,
            marker_weight: sim.citation_marker_w,
            remote_base_url: remote.base_url,
            remote_model: remote.model,
            remote_timeout_secs: remote.timeout_secs,
            remote_max_retries: remote.max_retries,
            planner_top_k: 25,
            planner_max_steps: 3,
        }
    }
}

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| bad(key, format!("cannot parse `{value}`: {e}")))
}

macro_rules! config_keys {
    ($($key:ident),+ $(,)?) => {
        /// Every accepted key, in snapshot order.
        pub const KEYS: &[&str] = &[$(stringify!($key)),+];

        impl RunConfig {
            /// Sets one field from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => self.$key = parse(key, value)?,)+
                    other => return Err(bad(other, "unknown configuration key")),
                }
                Ok(())
            }

            /// Snapshot in the same format `parse_config` reads.
            pub fn to_text(&self) -> String {
                let mut out = String::new();
                $(out.push_str(&format!("{} = {}\n", stringify!($key), self.$key));)+
                out
            }
        }
    };
}

config_keys!(
    iterations,
    k_top,
    k_rand,
    parents,
    evolver_candidates,
    symbolic_candidates,
    alpha_sib,
    beta,
    lambda,
    lambda_pnd,
    k_c,
    archive_capacity,
    novelty_threshold,
    critic_lr,
    evolver_lr,
    batch_size,
    epochs,
    freeze_epochs,
    replay_sample,
    seed,
    backend,
    proposer,
    evolver_temperature,
    in_flight,
    warm_start_contexts,
    checkpoint_every,
    critic_hidden,
    critic_hash_dim,
    critic_output_scale,
    dataset_queries,
    docs_per_query,
    sentences_per_answer,
    keyword_weight,
    statistic_weight,
    quote_weight,
    marker_weight,
    remote_base_url,
    remote_model,
    remote_timeout_secs,
    remote_max_retries,
    planner_top_k,
    planner_max_steps,
);

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.archive_config().validate()?;
        let positive = [
            ("beta", self.beta),
            ("evolver_temperature", self.evolver_temperature),
            ("critic_output_scale", self.critic_output_scale),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(k, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("lambda", self.lambda),
            ("critic_lr", self.critic_lr),
            ("evolver_lr", self.evolver_lr),
            ("keyword_weight", self.keyword_weight),
            ("statistic_weight", self.statistic_weight),
            ("quote_weight", self.quote_weight),
            ("marker_weight", self.marker_weight),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(k, format!("must be a finite non-negative number, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_sib) {
            return Err(bad("alpha_sib", format!("must lie in [0, 1], got {}", self.alpha_sib)));
        }
        if !(0.0..=1.0).contains(&self.novelty_threshold) {
            return Err(bad("novelty_threshold", "must lie in [0, 1]"));
        }
        let at_least_one = [
            ("parents", self.parents),
            ("batch_size", self.batch_size),
            ("in_flight", self.in_flight),
            ("checkpoint_every", self.checkpoint_every),
            ("critic_hidden", self.critic_hidden),
            ("critic_hash_dim", self.critic_hash_dim),
            ("dataset_queries", self.dataset_queries),
            ("docs_per_query", self.docs_per_query),
            ("sentences_per_answer", self.sentences_per_answer),
        ];
        for (k, v) in at_least_one {
            if v == 0 {
                return Err(bad(k, "must be at least 1"));
            }
        }
        if self.evolver_candidates + self.symbolic_candidates == 0 {
            return Err(bad("evolver_candidates", "at least one candidate per iteration is needed"));
        }
        if self.freeze_epochs > self.epochs {
            return Err(bad("freeze_epochs", "cannot exceed epochs"));
        }
        Ok(())
    }

    pub fn archive_config(&self) -> ArchiveConfig {
        ArchiveConfig {
            cell_capacity: self.k_c,
            global_capacity: self.archive_capacity,
            lambda_pnd: self.lambda_pnd,
            novelty_threshold: self.novelty_threshold,
            ..ArchiveConfig::default()
        }
    }

    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig {
            features: FeatureConfig {
                hash_dim: self.critic_hash_dim,
                ..FeatureConfig::default()
            },
            hidden: self.critic_hidden,
            output_scale: self.critic_output_scale,
            seed: self.seed,
            ..CriticConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.critic_lr,
            lambda: self.lambda,
            freeze_epochs: self.freeze_epochs,
            seed: self.seed,
        }
    }

    pub fn simulation_params(&self) -> SimulationParams {
        SimulationParams {
            seed: self.seed,
            sentences_per_answer: self.sentences_per_answer,
            keyword_overlap_w: self.keyword_weight,
            statistic_w: self.statistic_weight,
            quote_w: self.quote_weight,
            citation_marker_w: self.marker_weight,
        }
    }

    pub fn remote_params(&self) -> RemoteParams {
        RemoteParams {
            base_url: self.remote_base_url.clone(),
            model: self.remote_model.clone(),
            timeout_secs: self.remote_timeout_secs,
            max_retries: self.remote_max_retries,
            ..RemoteParams::default()
        }
    }

    pub fn dataset_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            queries: self.dataset_queries,
            docs_per_query: self.docs_per_query,
            seed: self.seed,
        }
    }
}

/// Parses `key = value` text on top of the defaults, then validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            what: "config",
            line: n + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if seen.contains(&key) {
            return Err(bad(key, "key given more than once"));
        }
        seen.push(key);
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
