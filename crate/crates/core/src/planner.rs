//! Multi-turn rewriting at inference time.
//!
//! Each turn picks the highest-scoring strategy not used yet, rewrites the
//! document with it, and stops once the best remaining score on the new
//! document no longer exceeds the best remaining score before the rewrite.

use serde::{Deserialize, Serialize};

use crate::archive::Archive;
use crate::critic::CriticModel;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::genotype::Strategy;
use crate::types::{Context, Document, Query};

/// Anything that can score a strategy on a context.
pub trait StrategyScorer {
    fn score(&self, ctx: &Context, s: &Strategy) -> f64;
}

impl StrategyScorer for CriticModel {
    fn score(&self, ctx: &Context, s: &Strategy) -> f64 {
        CriticModel::score(self, ctx, s)
    }
}

impl<F: Fn(&Context, &Strategy) -> f64> StrategyScorer for F {
    fn score(&self, ctx: &Context, s: &Strategy) -> f64 {
        self(ctx, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MarginalGain,
    MaxSteps,
    PoolExhausted,
    /// The rewrite backend failed; the last good document is kept.
    RewriteFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub strategy_id: String,
    /// Score of the chosen strategy when it was selected.
    pub score: f64,
    /// Document text after applying the strategy.
    pub document: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub query: String,
    pub initial_document: String,
    pub steps: Vec<PlanStep>,
    pub stop_reason: StopReason,
}

impl PlanTrace {
    pub fn final_document(&self) -> &str {
        self.steps.last().map_or(&self.initial_document, |s| &s.document)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub step: usize,
    pub document: Document,
    /// Ids of strategies already applied, in order.
    pub tabu: Vec<String>,
    pub pool: Vec<Strategy>,
}

impl PlannerState {
    pub fn new(document: Document, pool: Vec<Strategy>) -> Self {
        PlannerState {
            step: 0,
            document,
            tabu: Vec::new(),
            pool,
        }
    }
}

/// Best non-tabu strategy by score; ties go to the smallest id.
pub fn select_strategy<'a, S: StrategyScorer + ?Sized>(
    scorer: &S,
    ctx: &Context,
    pool: &'a [Strategy],
    tabu: &[String],
) -> Option<(&'a Strategy, f64)> {
    let mut best: Option<(&Strategy, f64)> = None;
    for s in pool.iter().filter(|s| !tabu.contains(&s.id)) {
        let v = scorer.score(ctx, s);
        best = match best {
            Some((b, bv)) if bv > v || (bv == v && b.id < s.id) => Some((b, bv)),
            _ => Some((s, v)),
        };
    }
    best
}

/// Decides whether to stop after a step. `before` is the best remaining
/// score on the old document and tabu list, `after` the same on the new
/// ones (`None` when nothing is left).
pub fn should_stop(before: f64, after: Option<f64>, steps_done: usize, max_steps: usize) -> Option<StopReason> {
    if steps_done >= max_steps {
        return Some(StopReason::MaxSteps);
    }
    match after {
        None => Some(StopReason::PoolExhausted),
        Some(a) if a <= before => Some(StopReason::MarginalGain),
        Some(_) => None,
    }
}

/// Result of one planning step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Continue,
    Stop(StopReason),
}

/// Selects, rewrites and evaluates the stop rule once.
pub fn plan_step<S: StrategyScorer + ?Sized, E: Engine + ?Sized>(
    state: &mut PlannerState,
    query: &Query,
    scorer: &S,
    engine: &E,
    max_steps: usize,
    trace: &mut Vec<PlanStep>,
) -> StepOutcome {
    let ctx = Context::new(query.clone(), state.document.clone());
    let Some((chosen, before)) = select_strategy(scorer, &ctx, &state.pool, &state.tabu) else {
        return StepOutcome::Stop(StopReason::PoolExhausted);
    };
    let chosen = chosen.clone();
    let next = match engine.rewrite(&state.document, &chosen, query) {
        Ok(d) if !d.text.trim().is_empty() => d,
        Ok(_) => {
            log::warn!("rewrite with `{}` returned empty text", chosen.id);
            return StepOutcome::Stop(StopReason::RewriteFailed);
        }
        Err(e) => {
            log::warn!("rewrite with `{}` failed: {e}", chosen.id);
            return StepOutcome::Stop(StopReason::RewriteFailed);
        }
    };
    state.tabu.push(chosen.id.clone());
    state.step += 1;
    state.document = next;
    trace.push(PlanStep {
        strategy_id: chosen.id.clone(),
        score: before,
        document: state.document.text.clone(),
    });
    let ctx = Context::new(query.clone(), state.document.clone());
    let after = select_strategy(scorer, &ctx, &state.pool, &state.tabu).map(|(_, v)| v);
    match should_stop(before, after, state.step, max_steps) {
        Some(r) => StepOutcome::Stop(r),
        None => StepOutcome::Continue,
    }
}

/// Plans over the `k` highest-PND archived strategies.
pub fn optimize<S: StrategyScorer + ?Sized, E: Engine + ?Sized>(
    query: &Query,
    document: &Document,
    archive: &Archive,
    scorer: &S,
    engine: &E,
    k: usize,
    max_steps: usize,
) -> Result<(Document, PlanTrace)> {
    if archive.is_empty() {
        return Err(Error::Validation("planning needs a non-empty archive".into()));
    }
    optimize_with_pool(query, document, archive.top_k_by_pnd(k), scorer, engine, max_steps)
}

pub fn optimize_with_pool<S: StrategyScorer + ?Sized, E: Engine + ?Sized>(
    query: &Query,
    document: &Document,
    pool: Vec<Strategy>,
    scorer: &S,
    engine: &E,
    max_steps: usize,
) -> Result<(Document, PlanTrace)> {
    let mut state = PlannerState::new(document.clone(), pool);
    let mut steps = Vec::new();
    let stop_reason = if max_steps == 0 {
        StopReason::MaxSteps
    } else {
        loop {
            if let StepOutcome::Stop(r) = plan_step(&mut state, query, scorer, engine, max_steps, &mut steps) {
                break r;
            }
        }
    };
    let trace = PlanTrace {
        query: query.text.clone(),
        initial_document: document.text.clone(),
        steps,
        stop_reason,
    };
    Ok((state.document, trace))
}

/// Fixed-width table of a trace for terminals.
pub fn render_trace_table(trace: &PlanTrace) -> String {
    let mut out = format!("{:<4} {:<32} {:>10} {:>7}\n", "step", "strategy", "score", "words");
    for (i, s) in trace.steps.iter().enumerate() {
        out.push_str(&format!(
            "{:<4} {:<32} {:>10.4} {:>7}\n",
            i + 1,
            s.strategy_id,
            s.score,
            s.document.split_whitespace().count()
        ));
    }
    out.push_str(&format!("stop: {:?}\n", trace.stop_reason));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EngineError, SimulatedEngine};
    use crate::genotype::{seed_genotypes, Genotype};

    fn pool(ids: &[&str]) -> Vec<Strategy> {
        ids.iter().map(|id| Strategy::new(*id, Genotype::default())).collect()
    }

    fn ctx() -> Context {
        Context::new(Query::new("q", "tidal power").unwrap(), Document::new("d", "Tides move."))
    }

    fn by_id(table: &'static [(&'static str, f64)]) -> impl Fn(&Context, &Strategy) -> f64 {
        move |_, s| table.iter().find(|(id, _)| *id == s.id).map(|(_, v)| *v).unwrap()
    }

    #[test]
    fn argmax_and_tabu() {
        let p = pool(&["A", "B"]);
        let f = by_id(&[("A", 0.9), ("B", 0.7)]);
        assert_eq!(select_strategy(&f, &ctx(), &p, &[]).unwrap().0.id, "A");
        assert_eq!(select_strategy(&f, &ctx(), &p, &["A".into()]).unwrap().0.id, "B");
        assert!(select_strategy(&f, &ctx(), &p, &["A".into(), "B".into()]).is_none());
    }

    #[test]
    fn constant_scores_pick_smallest_id() {
        let p = pool(&["m", "c", "x"]);
        let f = |_: &Context, _: &Strategy| 0.5;
        assert_eq!(select_strategy(&f, &ctx(), &p, &[]).unwrap().0.id, "c");
    }

    #[test]
    fn stop_rule_examples() {
        assert_eq!(should_stop(0.8, Some(0.8), 1, 3), Some(StopReason::MarginalGain));
        assert_eq!(should_stop(0.5, Some(0.7), 1, 3), None);
        assert_eq!(should_stop(0.5, Some(0.7), 3, 3), Some(StopReason::MaxSteps));
        assert_eq!(should_stop(0.5, None, 1, 3), Some(StopReason::PoolExhausted));
    }

    #[test]
    fn zero_steps_returns_input() {
        let d = Document::new("d", "Tides move.");
        let e = SimulatedEngine::with_seed(0);
        let f = |_: &Context, _: &Strategy| 0.0;
        let (out, trace) = optimize_with_pool(&ctx().query, &d, seed_genotypes(), &f, &e, 0).unwrap();
        assert_eq!(out, d);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn constant_critic_stops_after_one_step() {
        let d = Document::new("d", "Tides move water twice a day.");
        let e = SimulatedEngine::with_seed(0);
        let f = |_: &Context, _: &Strategy| 1.0;
        let (_, trace) = optimize_with_pool(&ctx().query, &d, seed_genotypes(), &f, &e, 3).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.stop_reason, StopReason::MarginalGain);
    }

    struct Failing;
    impl Engine for Failing {
        fn kind(&self) -> crate::engine::BackendKind {
            crate::engine::BackendKind::Simulated
        }
        fn rewrite(&self, doc: &Document, _: &Strategy, _: &Query) -> std::result::Result<Document, EngineError> {
            Ok(doc.with_text(""))
        }
        fn synthesize_answer(
            &self,
            _: &Query,
            _: &crate::types::CandidateSet,
        ) -> std::result::Result<crate::answer::CitedAnswer, EngineError> {
            Err(EngineError::InvalidRequest("unused".into()))
        }
    }

    #[test]
    fn empty_rewrite_keeps_document() {
        let d = Document::new("d", "Tides move.");
        let f = |_: &Context, _: &Strategy| 1.0;
        let (out, trace) = optimize_with_pool(&ctx().query, &d, seed_genotypes(), &f, &Failing, 3).unwrap();
        assert_eq!(out, d);
        assert!(trace.steps.is_empty());
        assert_eq!(trace.stop_reason, StopReason::RewriteFailed);
    }
}
