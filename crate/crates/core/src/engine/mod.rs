//! Generative-engine and rewriter backends.
//!
//! [`SimulatedEngine`] is a deterministic stand-in for a real engine whose
//! answer allocation responds to the same content levers the seed
//! strategies pull. [`RemoteEngine`] talks to an OpenAI-compatible
//! chat-completions endpoint.

pub mod dataset;
mod evaluator;
pub mod remote;
pub mod simulated;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::CitedAnswer;
use crate::genotype::Strategy;
use crate::types::{CandidateSet, Context, Document, Query};

pub use evaluator::{EvalOutcome, Evaluator};
pub use remote::{ChatClient, RemoteEngine, RemoteParams, ANSWER_SYNTHESIS_PROMPT};
pub use simulated::{LeverProfile, SimulatedEngine, SimulationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Simulated,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(BackendKind::Simulated),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("unknown backend `{other}` (expected simulated or remote)")),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Simulated => "simulated",
            BackendKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<EngineError> },
    #[error("rewrite returned empty text")]
    EmptyRewrite,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl EngineError {
    pub fn is_retryable(&self) -> bool {
        match self {
            EngineError::Transport(_) => true,
            EngineError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A generative engine plus the rewriting tool used with it.
pub trait Engine: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Rewrites `doc` for `query` under `strategy`.
    fn rewrite(
        &self,
        doc: &Document,
        strategy: &Strategy,
        query: &Query,
    ) -> Result<Document, EngineError>;

    /// Produces a cited answer over the candidate set.
    fn synthesize_answer(
        &self,
        query: &Query,
        candidates: &CandidateSet,
    ) -> Result<CitedAnswer, EngineError>;
}

/// Output of one rewrite, kept for traces and inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewriteRecord {
    pub context: Context,
    pub strategy_id: String,
    pub rewritten: Document,
    pub backend: BackendKind,
}

pub fn rewrite_record<E: Engine + ?Sized>(
    engine: &E,
    context: &Context,
    strategy: &Strategy,
) -> Result<RewriteRecord, EngineError> {
    let rewritten = engine.rewrite(&context.document, strategy, &context.query)?;
    if rewritten.text.trim().is_empty() {
        return Err(EngineError::EmptyRewrite);
    }
    Ok(RewriteRecord {
        context: context.clone(),
        strategy_id: strategy.id.clone(),
        rewritten,
        backend: engine.kind(),
    })
}

/// Closed set of backends selectable from configuration.
#[derive(Debug)]
pub enum EngineBackend {
    Simulated(SimulatedEngine),
    Remote(RemoteEngine),
}

impl Engine for EngineBackend {
    fn kind(&self) -> BackendKind {
        match self {
            EngineBackend::Simulated(_) => BackendKind::Simulated,
            EngineBackend::Remote(_) => BackendKind::Remote,
        }
    }

    fn rewrite(&self, doc: &Document, s: &Strategy, q: &Query) -> Result<Document, EngineError> {
        match self {
            EngineBackend::Simulated(e) => e.rewrite(doc, s, q),
            EngineBackend::Remote(e) => e.rewrite(doc, s, q),
        }
    }

    fn synthesize_answer(&self, q: &Query, c: &CandidateSet) -> Result<CitedAnswer, EngineError> {
        match self {
            EngineBackend::Simulated(e) => e.synthesize_answer(q, c),
            EngineBackend::Remote(e) => e.synthesize_answer(q, c),
        }
    }
}

impl<E: Engine + ?Sized> Engine for &E {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn rewrite(&self, doc: &Document, s: &Strategy, q: &Query) -> Result<Document, EngineError> {
        (**self).rewrite(doc, s, q)
    }

    fn synthesize_answer(&self, q: &Query, c: &CandidateSet) -> Result<CitedAnswer, EngineError> {
        (**self).synthesize_answer(q, c)
    }
}

impl<E: Engine + ?Sized> Engine for std::sync::Arc<E> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn rewrite(&self, doc: &Document, s: &Strategy, q: &Query) -> Result<Document, EngineError> {
        (**self).rewrite(doc, s, q)
    }

    fn synthesize_answer(&self, q: &Query, c: &CandidateSet) -> Result<CitedAnswer, EngineError> {
        (**self).synthesize_answer(q, c)
    }
}
