use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::simulated::candidate_fingerprint;
use super::{Engine, EngineError};
use crate::error::{Error, Result};
use crate::genotype::Strategy;
use crate::impressions::{compute_impressions, ImpressionScores};
use crate::types::{CandidateSet, Context, Query};

/// Result of a strategy evaluation. A failed rewrite is `Unevaluated`, never a
/// zero reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EvalOutcome {
    Reward(f64),
    Unevaluated(String),
}

impl EvalOutcome {
    pub fn reward(&self) -> Option<f64> {
        match self {
            EvalOutcome::Reward(r) => Some(*r),
            EvalOutcome::Unevaluated(_) => None,
        }
    }
}

type BaselineSlot = Arc<OnceLock<std::result::Result<ImpressionScores, EngineError>>>;

/// Computes rewards as overall-impression gains over the unrewritten set and
/// caches the baseline answer per (query, candidate set).
pub struct Evaluator<E> {
    engine: E,
    baselines: Mutex<HashMap<u64, BaselineSlot>>,
    baseline_syntheses: AtomicU64,
    evaluations: AtomicU64,
}

impl<E: Engine> Evaluator<E> {
    pub fn new(engine: E) -> Self {
        Evaluator {
            engine,
            baselines: Mutex::new(HashMap::new()),
            baseline_syntheses: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn engine(&self) -> &E {
        &self.engine
    }

    /// Number of baseline answers actually synthesized (cache misses).
    pub fn baseline_syntheses(&self) -> u64 {
        self.baseline_syntheses.load(Ordering::SeqCst)
    }

    /// Number of strategy evaluations issued against the engine.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    /// Impressions of the target in the unmodified candidate set. Concurrent
    /// first calls for the same key share a single synthesis.
    pub fn baseline(&self, query: &Query, candidates: &CandidateSet) -> Result<ImpressionScores> {
        let key = candidate_fingerprint(query, candidates);
        let slot = {
            let mut map = self.baselines.lock().expect("baseline cache poisoned");
            map.entry(key).or_default().clone()
        };
        let value = slot.get_or_init(|| {
            self.baseline_syntheses.fetch_add(1, Ordering::SeqCst);
            self.engine
                .synthesize_answer(query, candidates)
                .map(|a| compute_impressions(&a, candidates.target_citation()))
        });
        match value {
            Ok(s) => Ok(*s),
            Err(e) => {
                let err = e.clone();
                self.baselines
                    .lock()
                    .expect("baseline cache poisoned")
                    .remove(&key);
                Err(err.into())
            }
        }
    }

    /// Impressions of the target after replacing its text.
    pub fn impressions_with_text(
        &self,
        query: &Query,
        candidates: &CandidateSet,
        text: &str,
    ) -> Result<ImpressionScores> {
        let modified = candidates.with_target_text(text);
        let answer = self.engine.synthesize_answer(query, &modified)?;
        Ok(compute_impressions(&answer, candidates.target_citation()))
    }

    /// Overall-impression gain of `strategy` on the context's document.
    pub fn evaluate(
        &self,
        ctx: &Context,
        strategy: &Strategy,
        candidates: &CandidateSet,
    ) -> Result<EvalOutcome> {
        if candidates.target() != &ctx.document && candidates.target().text != ctx.document.text {
            return Err(Error::Contract(format!(
                "context document `{}` is not the candidate set's target",
                ctx.document.id
            )));
        }
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        let base = self.baseline(&ctx.query, candidates)?;
        let rewritten = match self.engine.rewrite(&ctx.document, strategy, &ctx.query) {
            Ok(d) if !d.text.trim().is_empty() => d,
            Ok(_) => return Ok(EvalOutcome::Unevaluated(EngineError::EmptyRewrite.to_string())),
            Err(e) => {
                log::warn!("rewrite with `{}` failed: {e}", strategy.id);
                return Ok(EvalOutcome::Unevaluated(e.to_string()));
            }
        };
        let after = self.impressions_with_text(&ctx.query, candidates, &rewritten.text)?;
        Ok(EvalOutcome::Reward(after.overall - base.overall))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimulatedEngine;
    use crate::genotype::{Genotype, StrategyType};
    use crate::types::Document;

    fn tied_set() -> (Query, CandidateSet) {
        let q = Query::new("q", "battery recycling rates").unwrap();
        let t = "Battery recycling is growing.";
        let c = CandidateSet::new(
            vec![Document::new("a", t), Document::new("b", t), Document::new("c", t)],
            1,
        )
        .unwrap();
        (q, c)
    }

    #[test]
    fn noop_reward_is_zero() {
        let (q, c) = tied_set();
        let ev = Evaluator::new(SimulatedEngine::with_seed(1));
        let ctx = Context::new(q, c.target().clone());
        let r = ev.evaluate(&ctx, &Strategy::new("noop", Genotype::default()), &c).unwrap();
        assert_eq!(r, EvalOutcome::Reward(0.0));
    }

    #[test]
    fn statistic_reward_positive_on_tied_set() {
        let (q, c) = tied_set();
        let ev = Evaluator::new(SimulatedEngine::with_seed(1));
        let ctx = Context::new(q, c.target().clone());
        let s = Strategy::new("stat", Genotype::with_intent(StrategyType::StatisticsAddition));
        assert!(ev.evaluate(&ctx, &s, &c).unwrap().reward().unwrap() > 0.0);
    }

    #[test]
    fn baseline_synthesized_once() {
        let (q, c) = tied_set();
        let ev = Evaluator::new(SimulatedEngine::with_seed(1));
        let ctx = Context::new(q, c.target().clone());
        let s = Strategy::new("stat", Genotype::with_intent(StrategyType::StatisticsAddition));
        ev.evaluate(&ctx, &s, &c).unwrap();
        ev.evaluate(&ctx, &s, &c).unwrap();
        assert_eq!(ev.baseline_syntheses(), 1);
        assert_eq!(ev.evaluations(), 2);
    }

    #[test]
    fn concurrent_first_access_is_single_flight() {
        let (q, c) = tied_set();
        let ev = Evaluator::new(SimulatedEngine::with_seed(1));
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| ev.baseline(&q, &c).unwrap());
            }
        });
        assert_eq!(ev.baseline_syntheses(), 1);
    }
}
