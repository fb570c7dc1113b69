//! Archive-driven co-evolution of strategies and critic.
//!
//! Each iteration proposes children of archived parents, lets the critic pick
//! which of them the engine evaluates, archives every child under a mixed
//! reward (engine gain where measured, critic prediction otherwise), and then
//! updates the operator policy and the critic from what was learned.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, InsertDecision};
use crate::config::{parse_config, ProposerKind, RunConfig};
use crate::critic::{
    build_offline_labels, calibrate_online, order_by_score, train_offline, CalibrationSample,
    CriticModel, TrainingSet, CONTRASTIVE_BAND,
};
use crate::engine::{ChatClient, EvalOutcome, Evaluator, Engine, LeverProfile};
use crate::error::{Error, Result};
use crate::evolver::{
    awr_update, proposals_from_remote, propose_candidates, remote_propose, sibling_advantage,
    EvolverPolicy, Experience, Proposal, SiblingChild, SiblingGroup,
};
use crate::genotype::{seed_genotypes, Genotype, Reward, RewardSource, Strategy};
use crate::types::{Context, Instance};
use crate::util::derived_rng;

pub const RUN_STATE_VERSION: u32 = 1;

/// One labeled (context, strategy) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub context_id: String,
    pub strategy_id: String,
    /// Kept so the entry stays usable after its strategy leaves the archive.
    pub genotype: Genotype,
    pub reward: f64,
    pub source: RewardSource,
    pub iteration: usize,
}

impl ReplayEntry {
    pub fn strategy(&self) -> Strategy {
        Strategy::new(self.strategy_id.clone(), self.genotype.clone())
    }
}

/// Append-only buffer that only accepts entries of one reward source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    source: RewardSource,
    entries: Vec<ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new(source: RewardSource) -> Self {
        ReplayBuffer {
            source,
            entries: Vec::new(),
        }
    }

    pub fn source(&self) -> RewardSource {
        self.source
    }

    pub fn push(&mut self, e: ReplayEntry) -> Result<()> {
        if e.source != self.source {
            return Err(Error::Contract(format!(
                "{:?}-sourced entry for `{}` offered to the {:?} buffer",
                e.source, e.strategy_id, self.source
            )));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    fn from_jsonl(source: RewardSource, text: &str) -> Result<Self> {
        let mut b = ReplayBuffer::new(source);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: ReplayEntry = serde_json::from_str(line).map_err(|e| Error::Format {
                what: "replay buffer",
                line: i + 1,
                message: e.to_string(),
            })?;
            b.push(e)?;
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub context_id: String,
    pub candidates: usize,
    pub evaluated: usize,
    pub ge_calls: usize,
    pub inserted: usize,
    pub replaced: usize,
    pub rejected_novelty: usize,
    pub rejected_value: usize,
    pub pruned: usize,
    pub archive_size: usize,
    /// Highest engine-measured gain of this iteration.
    pub iteration_best_ge: Option<f64>,
    /// Highest engine-measured gain seen so far.
    pub best_ge: Option<f64>,
    pub critic_loss: Option<f64>,
    pub evolver_loss: Option<f64>,
    /// Some evaluation failed; the affected candidates were left out.
    pub degraded: bool,
    pub regret: Option<f64>,
    pub cumulative_regret: Option<f64>,
}

/// Mean gain of every lever profile over a dataset, for regret accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretOracle {
    /// Indexed by `LeverProfile::bits`.
    pub mean_gain: Vec<f64>,
    pub best_bits: u8,
}

impl RegretOracle {
    /// Brute-force evaluation of every profile representative on `instances`.
    pub fn build<E: Engine>(evaluator: &Evaluator<E>, instances: &[Instance]) -> Result<Self> {
        let mut mean_gain = vec![0.0; 64];
        for p in LeverProfile::all() {
            let s = Strategy::new(format!("profile-{:02}", p.bits()), p.representative());
            mean_gain[p.bits() as usize] = mean_gain_of(evaluator, instances, &s)?.ok_or_else(|| {
                Error::Validation(format!("profile {} could not be evaluated", p.bits()))
            })?;
        }
        let best_bits = (0..64u8)
            .max_by(|a, b| {
                mean_gain[*a as usize]
                    .partial_cmp(&mean_gain[*b as usize])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(a))
            })
            .expect("64 profiles");
        Ok(RegretOracle {
            mean_gain,
            best_bits,
        })
    }

    pub fn best(&self) -> f64 {
        self.mean_gain[self.best_bits as usize]
    }

    pub fn regret(&self, g: &Genotype) -> f64 {
        self.best() - self.mean_gain[LeverProfile::of(g).bits() as usize]
    }
}

/// Mean engine gain of `s` over `instances`; `None` if nothing could be measured.
pub fn mean_gain_of<E: Engine>(
    evaluator: &Evaluator<E>,
    instances: &[Instance],
    s: &Strategy,
) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for inst in instances {
        if let EvalOutcome::Reward(r) = evaluator.evaluate(&inst.context(), s, &inst.candidates)? {
            sum += r;
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// The strategy with the highest mean engine gain over `instances` (ties: first).
pub fn verified_best<'a, E: Engine>(
    evaluator: &Evaluator<E>,
    instances: &[Instance],
    strategies: impl IntoIterator<Item = &'a Strategy>,
) -> Result<Option<(String, f64)>> {
    let mut best: Option<(String, f64)> = None;
    for s in strategies {
        if let Some(g) = mean_gain_of(evaluator, instances, s)? {
            if best.as_ref().is_none_or(|(_, b)| g > *b) {
                best = Some((s.id.clone(), g));
            }
        }
    }
    Ok(best)
}

/// Indices to evaluate: the `k_top` highest scores (ties: lower index), then
/// `k_rand` uniform draws without replacement from the rest.
pub fn select_for_evaluation<R: Rng + ?Sized>(
    scores: &[f64],
    k_top: usize,
    k_rand: usize,
    rng: &mut R,
) -> Vec<usize> {
    let order = order_by_score(scores);
    let split = k_top.min(order.len());
    let mut out: Vec<usize> = order[..split].to_vec();
    let mut rest: Vec<usize> = order[split..].to_vec();
    rest.sort_unstable();
    out.extend(rest.choose_multiple(rng, k_rand).copied());
    out
}

/// Critic scores of `cands` on `ctx` and the screened evaluation set.
pub fn screen_candidates<R: Rng + ?Sized>(
    critic: &CriticModel,
    ctx: &Context,
    cands: &[Strategy],
    k_top: usize,
    k_rand: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let scores = critic.score_many(ctx, cands);
    let chosen = select_for_evaluation(&scores, k_top, k_rand, rng);
    (scores, chosen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunState {
    format_version: u32,
    iteration: usize,
    best_ge: Option<f64>,
    warm_start_calls: usize,
    cumulative_regret: f64,
    regret: Option<RegretOracle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub ge_calls: usize,
    pub warm_start_calls: usize,
    pub best_ge: Option<f64>,
    pub archive_size: usize,
    pub best_archived: Option<String>,
    pub cumulative_regret: Option<f64>,
}

/// Full co-evolution state; everything needed to continue a run.
pub struct Coevolution<E: Engine> {
    pub config: RunConfig,
    pub evaluator: Evaluator<E>,
    pub instances: Vec<Instance>,
    pub archive: Archive,
    pub critic: CriticModel,
    pub policy: EvolverPolicy,
    pub b_true: ReplayBuffer,
    pub b_pred: ReplayBuffer,
    pub experiences: Vec<Experience>,
    pub reports: Vec<IterationReport>,
    iteration: usize,
    best_ge: Option<f64>,
    warm_start_calls: usize,
    cumulative_regret: f64,
    regret: Option<RegretOracle>,
    contexts: Vec<Context>,
    context_index: HashMap<String, usize>,
    proposer: Option<ChatClient>,
}

fn index_contexts(instances: &[Instance]) -> (Vec<Context>, HashMap<String, usize>) {
    let contexts: Vec<Context> = instances.iter().map(Instance::context).collect();
    let index = contexts.iter().enumerate().map(|(i, c)| (c.id(), i)).collect();
    (contexts, index)
}

impl<E: Engine> Coevolution<E> {
    /// Seeds the archive and, if configured, aligns the critic offline on
    /// engine labels of the seeds before the first iteration.
    pub fn new(config: RunConfig, evaluator: Evaluator<E>, instances: Vec<Instance>) -> Result<Self> {
        config.validate()?;
        if instances.is_empty() {
            return Err(Error::Validation("co-evolution needs a non-empty dataset".into()));
        }
        for inst in &instances {
            inst.validate()?;
        }
        let (contexts, context_index) = index_contexts(&instances);
        if context_index.len() != contexts.len() {
            return Err(Error::Validation("dataset contains repeated (query, document) ids".into()));
        }
        let mut run = Coevolution {
            archive: Archive::new(config.archive_config())?,
            critic: CriticModel::new(config.critic_config())?,
            policy: EvolverPolicy::uniform(config.evolver_temperature),
            b_true: ReplayBuffer::new(RewardSource::Ge),
            b_pred: ReplayBuffer::new(RewardSource::Critic),
            experiences: Vec::new(),
            reports: Vec::new(),
            iteration: 0,
            best_ge: None,
            warm_start_calls: 0,
            cumulative_regret: 0.0,
            regret: None,
            contexts,
            context_index,
            proposer: None,
            config,
            evaluator,
            instances,
        };
        run.seed_archive()?;
        Ok(run)
    }

    fn seed_archive(&mut self) -> Result<()> {
        let seeds = seed_genotypes();
        let n = self.config.warm_start_contexts.min(self.instances.len());
        let mut rewards: HashMap<String, Reward> = HashMap::new();
        if n > 0 {
            let before = self.evaluator.evaluations();
            let mut rng = derived_rng(self.config.seed, &["warm-start"]);
            let data = build_offline_labels(
                &self.evaluator,
                &self.instances[..n],
                &seeds,
                CONTRASTIVE_BAND,
                &mut rng,
            )?;
            self.warm_start_calls = (self.evaluator.evaluations() - before) as usize;
            let set = TrainingSet::from_offline(&data, &self.critic)?;
            if !set.is_empty() {
                train_offline(&mut self.critic, &set, &self.config.train_config())?;
            }
            let mut sums: HashMap<&str, (f64, usize)> = HashMap::new();
            for l in &data.labels {
                let s = sums.entry(l.strategy_id.as_str()).or_default();
                s.0 += l.gain;
                s.1 += 1;
                let seed = &data.strategies[&l.strategy_id];
                self.b_true.push(ReplayEntry {
                    context_id: l.context_id.clone(),
                    strategy_id: seed.id.clone(),
                    genotype: seed.genotype.clone(),
                    reward: l.gain,
                    source: RewardSource::Ge,
                    iteration: 0,
                })?;
            }
            for (id, (sum, k)) in sums {
                rewards.insert(
                    id.to_string(),
                    Reward {
                        value: sum / k as f64,
                        source: RewardSource::Ge,
                    },
                );
            }
        }
        for s in seeds {
            let reward = rewards.get(&s.id).copied().unwrap_or(Reward {
                value: 0.0,
                source: RewardSource::Critic,
            });
            let decision = self.archive.try_insert(s, reward)?;
            log::debug!("seed insertion: {decision:?}");
        }
        self.archive.refresh_pnd();
        Ok(())
    }

    /// Tracks regret against the brute-force best lever profile. The
    /// strategy charged at iteration t is the archived one with the highest
    /// critic score summed over the dataset at the start of t.
    pub fn enable_regret(&mut self, oracle: RegretOracle) {
        self.regret = Some(oracle);
    }

    /// Uses a chat model instead of the local policy for the policy share
    /// of each batch.
    pub fn with_remote_proposer(mut self, client: ChatClient) -> Self {
        self.proposer = Some(client);
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn best_ge(&self) -> Option<f64> {
        self.best_ge
    }

    pub fn warm_start_calls(&self) -> usize {
        self.warm_start_calls
    }

    pub fn cumulative_regret(&self) -> Option<f64> {
        self.regret.as_ref().map(|_| self.cumulative_regret)
    }

    pub fn regret_oracle(&self) -> Option<&RegretOracle> {
        self.regret.as_ref()
    }

    /// Dataset index used at iteration `t` (1-based): round-robin over a
    /// seeded permutation redrawn each pass.
    pub fn instance_for(&self, t: usize) -> usize {
        let n = self.instances.len();
        let pass = (t - 1) / n;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut derived_rng(self.config.seed, &["order", &pass.to_string()]));
        order[(t - 1) % n]
    }

    fn propose(&self, ctx: &Context, parents: &[Strategy], t: usize, rng: &mut crate::util::Rng) -> Vec<Proposal> {
        let prefix = format!("t{t:04}");
        let cfg = &self.config;
        let use_remote = cfg.proposer == ProposerKind::Remote && self.proposer.is_some();
        if !use_remote {
            return propose_candidates(
                &self.policy,
                ctx,
                parents,
                (cfg.evolver_candidates, cfg.symbolic_candidates),
                &prefix,
                rng,
            );
        }
        let client = self.proposer.as_ref().expect("checked");
        let mut out = Vec::new();
        let per_parent = cfg.evolver_candidates.div_ceil(parents.len().max(1));
        for (i, a) in parents.iter().enumerate() {
            let b = parents.get((i + 1) % parents.len()).filter(|b| b.id != a.id);
            match remote_propose(client, ctx, &a.genotype, b.map(|s| &s.genotype), per_parent) {
                Ok(p) if !p.is_empty() => {
                    out.extend(proposals_from_remote(ctx, a, b, &p, &format!("{prefix}-p{i}")))
                }
                Ok(_) => log::warn!("remote proposer returned no usable action for `{}`", a.id),
                Err(e) => log::warn!("remote proposal for `{}` failed: {e}", a.id),
            }
        }
        let symbolic = propose_candidates(
            &self.policy,
            ctx,
            parents,
            (0, cfg.symbolic_candidates),
            &format!("{prefix}-s"),
            rng,
        );
        for p in symbolic {
            if !out.iter().any(|q: &Proposal| q.strategy.summary == p.strategy.summary) {
                out.push(p);
            }
        }
        out
    }

    fn evaluate_parallel(&self, ctx: &Context, inst: &Instance, chosen: &[&Strategy]) -> Vec<Result<EvalOutcome>> {
        let limit = self.config.in_flight.max(1);
        let mut out: Vec<Result<EvalOutcome>> = Vec::with_capacity(chosen.len());
        for block in chosen.chunks(limit) {
            if block.len() == 1 || limit == 1 {
                out.extend(block.iter().map(|s| self.evaluator.evaluate(ctx, s, &inst.candidates)));
                continue;
            }
            std::thread::scope(|scope| {
                let handles: Vec<_> = block
                    .iter()
                    .map(|s| scope.spawn(move || self.evaluator.evaluate(ctx, s, &inst.candidates)))
                    .collect();
                for h in handles {
                    out.push(h.join().unwrap_or_else(|_| {
                        Err(Error::Contract("evaluation thread panicked".into()))
                    }));
                }
            });
        }
        out
    }

    /// Runs one iteration on the next dataset instance.
    pub fn step(&mut self) -> Result<IterationReport> {
        let t = self.iteration + 1;
        let cfg = self.config.clone();
        let mut rng = derived_rng(cfg.seed, &["iteration", &t.to_string()]);
        let inst_idx = self.instance_for(t);
        let ctx = self.contexts[inst_idx].clone();
        let inst = self.instances[inst_idx].clone();

        let regret = self.regret.as_ref().map(|oracle| {
            let pool: Vec<Strategy> = self.archive.strategies().cloned().collect();
            let mut scores = vec![0.0; pool.len()];
            for c in &self.contexts {
                for (acc, v) in scores.iter_mut().zip(self.critic.score_many(c, &pool)) {
                    *acc += v;
                }
            }
            let pick = (0..pool.len())
                .max_by(|&a, &b| {
                    scores[a]
                        .partial_cmp(&scores[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(pool[b].id.cmp(&pool[a].id))
                })
                .expect("archive is never empty");
            oracle.regret(&pool[pick].genotype)
        });

        // Phase 1: hybrid candidate generation.
        let parents = self.archive.sample_parents(cfg.parents, &mut rng);
        let proposals = self.propose(&ctx, &parents, t, &mut rng);
        let cands: Vec<Strategy> = proposals.iter().map(|p| p.strategy.clone()).collect();

        // Phase 2: critic scoring and budgeted selection.
        let (scores, chosen) = screen_candidates(&self.critic, &ctx, &cands, cfg.k_top, cfg.k_rand, &mut rng);
        let parent_scores = self.critic.score_many(&ctx, &parents);

        // Phase 3: engine evaluation of the screened set.
        let chosen_refs: Vec<&Strategy> = chosen.iter().map(|&i| &cands[i]).collect();
        let outcomes = self.evaluate_parallel(&ctx, &inst, &chosen_refs);
        let mut ge: HashMap<usize, f64> = HashMap::new();
        let mut failed: Vec<usize> = Vec::new();
        for (&i, outcome) in chosen.iter().zip(outcomes) {
            match outcome {
                Ok(EvalOutcome::Reward(r)) => {
                    ge.insert(i, r);
                }
                Ok(EvalOutcome::Unevaluated(why)) => {
                    log::warn!("iteration {t}: `{}` unevaluated: {why}", cands[i].id);
                    failed.push(i);
                }
                Err(Error::Backend(e)) => {
                    log::warn!("iteration {t}: engine failure on `{}`: {e}", cands[i].id);
                    failed.push(i);
                }
                Err(e) => return Err(e),
            }
        }

        // Phase 4: mixed-reward archive update.
        let mut report = IterationReport {
            iteration: t,
            context_id: ctx.id(),
            candidates: cands.len(),
            evaluated: chosen.len(),
            ge_calls: chosen.len(),
            inserted: 0,
            replaced: 0,
            rejected_novelty: 0,
            rejected_value: 0,
            pruned: 0,
            archive_size: 0,
            iteration_best_ge: None,
            best_ge: None,
            critic_loss: None,
            evolver_loss: None,
            degraded: !failed.is_empty(),
            regret,
            cumulative_regret: None,
        };
        let mut new_true: Vec<ReplayEntry> = Vec::new();
        let mut rewarded: Vec<Option<Reward>> = vec![None; cands.len()];
        for (i, s) in cands.iter().enumerate() {
            if failed.contains(&i) {
                continue;
            }
            let reward = match ge.get(&i) {
                Some(&r) => Reward {
                    value: r,
                    source: RewardSource::Ge,
                },
                None => Reward {
                    value: scores[i],
                    source: RewardSource::Critic,
                },
            };
            rewarded[i] = Some(reward);
            match self.archive.try_insert(s.clone(), reward)? {
                InsertDecision::Inserted => report.inserted += 1,
                InsertDecision::Replaced { .. } => report.replaced += 1,
                InsertDecision::RejectedNovelty { .. } => report.rejected_novelty += 1,
                InsertDecision::RejectedValue => report.rejected_value += 1,
            }
            let entry = ReplayEntry {
                context_id: ctx.id(),
                strategy_id: s.id.clone(),
                genotype: s.genotype.clone(),
                reward: reward.value,
                source: reward.source,
                iteration: t,
            };
            match reward.source {
                RewardSource::Ge => {
                    report.iteration_best_ge =
                        Some(report.iteration_best_ge.map_or(reward.value, |b: f64| b.max(reward.value)));
                    new_true.push(entry.clone());
                    self.b_true.push(entry)?;
                }
                RewardSource::Critic => self.b_pred.push(entry)?,
            }
        }
        if let Some(b) = report.iteration_best_ge {
            self.best_ge = Some(self.best_ge.map_or(b, |x| x.max(b)));
        }

        // Sibling-aware policy update.
        let mut fresh: Vec<Experience> = Vec::new();
        for (pi, parent) in parents.iter().enumerate() {
            let members: Vec<usize> = (0..cands.len())
                .filter(|&i| proposals[i].parent_id == parent.id && rewarded[i].is_some())
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut children = Vec::with_capacity(members.len());
            for &i in &members {
                let r = rewarded[i].expect("filtered");
                let s = cands[i].clone().with_reward(r.value, r.source);
                children.push(SiblingChild {
                    strategy_id: s.id.clone(),
                    reward: r.value,
                    pnd: self.archive.pnd_score(&s)?.pnd,
                });
            }
            let group = SiblingGroup {
                parent_id: parent.id.clone(),
                parent_reward: parent_scores[pi],
                children,
            };
            for (&i, a) in members.iter().zip(sibling_advantage(&group, cfg.alpha_sib)?) {
                fresh.push(Experience {
                    features: proposals[i].features.clone(),
                    mask: proposals[i].mask.clone(),
                    operator: proposals[i].operator,
                    advantage: a,
                });
            }
        }
        let mut batch: Vec<Experience> = self
            .experiences
            .choose_multiple(&mut rng, cfg.replay_sample)
            .cloned()
            .collect();
        batch.extend(fresh.iter().cloned());
        if let Some(r) = awr_update(&mut self.policy, &batch, cfg.beta, cfg.evolver_lr)? {
            report.evolver_loss = Some(r.loss);
        }
        self.experiences.extend(fresh);

        // Online critic calibration on new engine labels plus a replay sample.
        let past = &self.b_true.entries()[..self.b_true.len() - new_true.len()];
        let mut calib: Vec<ReplayEntry> = past.choose_multiple(&mut rng, cfg.replay_sample).cloned().collect();
        calib.extend(new_true);
        let strategies: Vec<Strategy> = calib.iter().map(ReplayEntry::strategy).collect();
        let mut samples = Vec::with_capacity(calib.len());
        for (e, s) in calib.iter().zip(&strategies) {
            let ci = *self.context_index.get(&e.context_id).ok_or_else(|| {
                Error::Validation(format!("replay entry refers to unknown context `{}`", e.context_id))
            })?;
            samples.push(CalibrationSample {
                context: &self.contexts[ci],
                strategy: s,
                reward: e.reward,
                source: e.source,
            });
        }
        let mut tc = cfg.train_config();
        tc.seed = cfg.seed ^ (t as u64).rotate_left(32);
        if let Some(loss) = calibrate_online(&mut self.critic, &samples, &tc)? {
            report.critic_loss = Some(loss.total);
        }

        self.archive.refresh_pnd();
        report.pruned = self.archive.prune().len();
        report.archive_size = self.archive.len();
        report.best_ge = self.best_ge;
        if let Some(r) = regret {
            self.cumulative_regret += r;
            report.cumulative_regret = Some(self.cumulative_regret);
        }
        self.iteration = t;
        log::info!(
            "iteration {t}: {} candidates, {} evaluated, +{} / ~{} archived, best {:?}",
            report.candidates,
            report.evaluated,
            report.inserted,
            report.replaced,
            report.best_ge
        );
        self.reports.push(report.clone());
        Ok(report)
    }

    /// Runs until `config.iterations`, checkpointing into `out` if given.
    pub fn run(&mut self, out: Option<&Path>) -> Result<RunSummary> {
        if let Some(dir) = out {
            self.save(dir)?;
        }
        while self.iteration < self.config.iterations {
            self.step()?;
            if let Some(dir) = out {
                if self.iteration.is_multiple_of(self.config.checkpoint_every)
                    || self.iteration == self.config.iterations
                {
                    self.save(dir)?;
                }
            }
        }
        Ok(self.summary())
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            iterations: self.iteration,
            ge_calls: self.reports.iter().map(|r| r.ge_calls).sum(),
            warm_start_calls: self.warm_start_calls,
            best_ge: self.best_ge,
            archive_size: self.archive.len(),
            best_archived: self.archive.best_by_reward().map(|e| e.strategy.id.clone()),
            cumulative_regret: self.cumulative_regret(),
        }
    }

    fn state(&self) -> RunState {
        RunState {
            format_version: RUN_STATE_VERSION,
            iteration: self.iteration,
            best_ge: self.best_ge,
            warm_start_calls: self.warm_start_calls,
            cumulative_regret: self.cumulative_regret,
            regret: self.regret.clone(),
        }
    }

    /// Writes the whole run state under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("config.txt", &self.config.to_text())?;
        self.archive.save(&dir.join("archive.jsonl"))?;
        write("b_true.jsonl", &self.b_true.to_jsonl()?)?;
        write("b_pred.jsonl", &self.b_pred.to_jsonl()?)?;
        let mut exp = String::new();
        for e in &self.experiences {
            exp.push_str(&serde_json::to_string(e)?);
            exp.push('\n');
        }
        write("experiences.jsonl", &exp)?;
        self.critic.save(&dir.join("critic.json"))?;
        self.policy.save(&dir.join("policy.json"))?;
        let mut reports = Vec::new();
        for r in &self.reports {
            writeln!(reports, "{}", serde_json::to_string(r)?).expect("writing to memory");
        }
        write("reports.jsonl", &String::from_utf8(reports).expect("utf-8 JSON"))?;
        write("state.json", &serde_json::to_string_pretty(&self.state())?)
    }

    /// Restores a run saved by [`Coevolution::save`]. The dataset and engine
    /// must be the ones the run was started with.
    pub fn resume(dir: &Path, evaluator: Evaluator<E>, instances: Vec<Instance>) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        let config = parse_config(&read("config.txt")?)?;
        let state: RunState = serde_json::from_str(&read("state.json")?)?;
        if state.format_version != RUN_STATE_VERSION {
            return Err(Error::Format {
                what: "run state",
                line: 1,
                message: format!("unsupported format version {}", state.format_version),
            });
        }
        let mut experiences = Vec::new();
        for (i, line) in read("experiences.jsonl")?.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            experiences.push(serde_json::from_str(line).map_err(|e| Error::Format {
                what: "experiences",
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        let mut reports: Vec<IterationReport> = Vec::new();
        for (i, line) in read("reports.jsonl")?.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            reports.push(serde_json::from_str(line).map_err(|e| Error::Format {
                what: "reports",
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        reports.truncate(state.iteration);
        let (contexts, context_index) = index_contexts(&instances);
        Ok(Coevolution {
            archive: Archive::load(&dir.join("archive.jsonl"))?,
            critic: CriticModel::load(&dir.join("critic.json"))?,
            policy: EvolverPolicy::load(&dir.join("policy.json"))?,
            b_true: ReplayBuffer::from_jsonl(RewardSource::Ge, &read("b_true.jsonl")?)?,
            b_pred: ReplayBuffer::from_jsonl(RewardSource::Critic, &read("b_pred.jsonl")?)?,
            experiences,
            reports,
            iteration: state.iteration,
            best_ge: state.best_ge,
            warm_start_calls: state.warm_start_calls,
            cumulative_regret: state.cumulative_regret,
            regret: state.regret,
            contexts,
            context_index,
            proposer: None,
            config,
            evaluator,
            instances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::dataset::{synthetic_dataset, SyntheticSpec};
    use crate::engine::SimulatedEngine;

    fn small_run(seed: u64, iterations: usize) -> Coevolution<SimulatedEngine> {
        let cfg = RunConfig {
            seed,
            iterations,
            critic_hash_dim: 512,
            critic_hidden: 16,
            warm_start_contexts: 3,
            ..RunConfig::default()
        };
        let data = synthetic_dataset(&SyntheticSpec {
            queries: 6,
            seed,
            ..Default::default()
        });
        Coevolution::new(cfg, Evaluator::new(SimulatedEngine::with_seed(seed)), data).unwrap()
    }

    #[test]
    fn selection_edge_cases() {
        let mut rng = derived_rng(0, &["sel"]);
        let scores = [0.1, 0.9, 0.5, 0.7];
        assert_eq!(select_for_evaluation(&scores, 2, 0, &mut rng), vec![1, 3]);
        let mut all = select_for_evaluation(&scores, 2, 5, &mut rng);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        let many: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(select_for_evaluation(&many, 4, 4, &mut rng).len(), 8);
    }

    #[test]
    fn buffers_enforce_purity() {
        let mut b = ReplayBuffer::new(RewardSource::Ge);
        let e = ReplayEntry {
            context_id: "c".into(),
            strategy_id: "s".into(),
            genotype: Genotype::default(),
            reward: 1.0,
            source: RewardSource::Critic,
            iteration: 1,
        };
        assert!(b.push(e).is_err());
        assert!(b.is_empty());
    }

    #[test]
    fn zero_iterations_keeps_seeds() {
        let mut run = small_run(1, 0);
        let s = run.run(None).unwrap();
        assert_eq!(s.iterations, 0);
        let mut ids: Vec<String> = run.archive.strategies().map(|s| s.id.clone()).collect();
        ids.sort();
        let mut seeds: Vec<String> = seed_genotypes().into_iter().map(|s| s.id).collect();
        seeds.sort();
        assert_eq!(ids, seeds);
    }

    #[test]
    fn iterations_respect_budget_and_sources() {
        let mut run = small_run(2, 6);
        run.run(None).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for r in &run.reports {
            assert!(r.ge_calls <= 8);
            let b = r.best_ge.unwrap();
            assert!(b >= prev);
            prev = b;
        }
        assert!(run.b_true.entries().iter().all(|e| e.source == RewardSource::Ge));
        assert!(run.b_pred.entries().iter().all(|e| e.source == RewardSource::Critic));
        assert!(run
            .archive
            .elites()
            .any(|e| e.strategy.reward.unwrap().source == RewardSource::Critic));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut full = small_run(3, 6);
        full.run(None).unwrap();

        let mut first = small_run(3, 6);
        first.config.checkpoint_every = 3;
        for _ in 0..3 {
            first.step().unwrap();
        }
        first.save(dir.path()).unwrap();
        let data = first.instances.clone();
        drop(first);
        let mut resumed =
            Coevolution::resume(dir.path(), Evaluator::new(SimulatedEngine::with_seed(3)), data).unwrap();
        resumed.run(None).unwrap();
        assert_eq!(resumed.archive.to_jsonl().unwrap(), full.archive.to_jsonl().unwrap());
        assert_eq!(resumed.reports, full.reports);
        assert_eq!(resumed.critic, full.critic);
    }
}
