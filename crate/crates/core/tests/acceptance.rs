//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use geo_evolve::archive::{ngram_similarity, Archive, ArchiveConfig, InsertDecision};
use geo_evolve::cli::{labeling_pool, ndcg_report, run_cli};
use geo_evolve::coevolution::{verified_best, Coevolution, RegretOracle};
use geo_evolve::config::RunConfig;
use geo_evolve::critic::features::encode_strategy;
use geo_evolve::critic::loss::loss_from_scores;
use geo_evolve::critic::{
    hybrid_loss, hybrid_loss_grad, train_offline, CriticConfig, CriticModel, FeatureConfig, FeatureVector, LossBatch,
    OfflineData, OfflineLabel, PreferencePair, Stage, TrainConfig, WeightedPair,
};
use geo_evolve::engine::dataset::{synthetic_dataset, SyntheticSpec};
use geo_evolve::engine::{Engine, Evaluator, SimulatedEngine};
use geo_evolve::evolver::{
    awr_update, policy_features, operator_mask, sibling_advantage, EvolverPolicy, Experience, SiblingChild,
    SiblingGroup,
};
use geo_evolve::genotype::{apply_operator, descriptor, seed_genotypes, Genotype, OperatorId, Reward, RewardSource, Strategy, CATALOG};
use geo_evolve::impressions::{compute_impressions, sensitivity_profile};
use geo_evolve::planner::{optimize, optimize_with_pool};
use geo_evolve::util::derived_rng;
use geo_evolve::{CitedAnswer, Context, Sentence};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn random_answer(rng: &mut impl Rng, len: usize, n: usize) -> CitedAnswer {
    CitedAnswer::new(
        (0..len)
            .map(|_| {
                let k = rng.gen_range(0..=3);
                let cites: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=n)).collect();
                Sentence::with_word_count(rng.gen_range(0..60), cites)
            })
            .collect(),
    )
}

/// Brute-force scores for every source: expand each sentence into one
/// (source, words, position) record per citation, then sum.
fn oracle_scores(a: &CitedAnswer, n: usize) -> Vec<[f64; 3]> {
    let l = a.sentences.len();
    let mut records = Vec::new();
    for (i, s) in a.sentences.iter().enumerate() {
        let decay = if l == 1 { 1.0 } else { std::f64::consts::E.powf(-(i as f64) / ((l - 1) as f64)) };
        for &c in &s.citations {
            records.push((c, s.word_count as f64, decay, s.citations.len() as f64));
        }
    }
    (1..=n)
        .map(|j| {
            let mut out = [0.0; 3];
            for &(_, wc, w, k) in records.iter().filter(|r| r.0 == j) {
                out[0] += wc / k;
                out[1] += w / k;
                out[2] += wc * w / k;
            }
            out
        })
        .collect()
}

fn c1_metric_oracle() -> Outcome {
    let mut rng = derived_rng(1, &["acceptance", "metric"]);
    let n = 6;
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let len = if case < 100 { 1 } else { rng.gen_range(0..15) };
        let a = random_answer(&mut rng, len, n);
        let want = oracle_scores(&a, n);
        for j in 1..=n {
            let got = compute_impressions(&a, j);
            for (g, w) in [got.word, got.pos, got.overall].iter().zip(want[j - 1]) {
                worst = worst.max(if w == 0.0 && *g == 0.0 { 0.0 } else { rel_err(*g, w) });
            }
            if len == 1 && got.overall != got.word {
                return outcome(false, format!("L=1 case {case}: overall {} != word {}", got.overall, got.word));
            }
        }
    }
    outcome(worst <= 1e-9, format!("1000 answers, max relative error {worst:.2e}"))
}

fn c2_sensitivity() -> Outcome {
    let cases: [(&[f64], f64); 3] = [
        (&[4.0; 9], 0.0),
        (&[10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0 - 1.0 / 9.0),
        (&[10.0, 6.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0 - 2.0 / 9.0),
    ];
    let mut got = Vec::new();
    for (scores, want) in cases {
        let s = sensitivity_profile(scores).map(|p| p.sensitivity).unwrap_or(f64::NAN);
        if s != want {
            return outcome(false, format!("{scores:?}: got {s}, want {want}"));
        }
        got.push(format!("{s:.6}"));
    }
    outcome(true, format!("sensitivities {}", got.join(", ")))
}

/// Genotype reached from a seed by a random chain of operators.
fn random_genotype(rng: &mut impl Rng, seeds: &[Strategy]) -> Genotype {
    let mut g = seeds.choose(rng).unwrap().genotype.clone();
    for _ in 0..rng.gen_range(0..8) {
        let op = *CATALOG.choose(rng).unwrap();
        let other = seeds.choose(rng).unwrap().genotype.clone();
        if op.is_applicable(&g) {
            g = apply_operator(op, &g, op.is_crossover().then_some(&other), rng).unwrap();
        }
    }
    g
}

fn c3_archive_fuzz() -> Outcome {
    let mut rng = derived_rng(3, &["acceptance", "archive"]);
    let seeds = seed_genotypes();
    let mut archive = Archive::new(ArchiveConfig::default()).unwrap();
    let (mut inserts, mut replacements, mut prunes) = (0, 0, 0);
    let (mut novelty_rejects, mut value_rejects) = (0, 0);
    for op in 0..10_000 {
        if rng.gen_bool(0.02) {
            archive.refresh_pnd();
            prunes += archive.prune().len();
        } else {
            // Half the candidates are variants of current elites built from
            // operators that mostly touch fields outside the cell key, which
            // crowds existing cells and exercises the value gate.
            let elites: Vec<Strategy> = archive.strategies().cloned().collect();
            let g = match elites.choose(&mut rng) {
                Some(e) if rng.gen_bool(0.5) => {
                    let mut g = e.genotype.clone();
                    for _ in 0..rng.gen_range(1..=4) {
                        let op = *[OperatorId::TTechnicality, OperatorId::RAddStep, OperatorId::RRemoveStep, OperatorId::CStrengthen]
                            .choose(&mut rng)
                            .unwrap();
                        if op.is_applicable(&g) {
                            g = apply_operator(op, &g, None, &mut rng).unwrap();
                        }
                    }
                    g
                }
                _ => random_genotype(&mut rng, &seeds),
            };
            let s = Strategy::new(format!("s{op:05}"), g);
            let key = descriptor(&s.genotype);
            let before = archive.cell(&key).and_then(|c| c.min_reward());
            let r = Reward { value: rng.gen_range(-5.0..20.0), source: RewardSource::Ge };
            match archive.try_insert(s, r) {
                Ok(InsertDecision::Replaced { .. }) => {
                    replacements += 1;
                    let after = archive.cell(&key).and_then(|c| c.min_reward());
                    if after < before {
                        return outcome(false, format!("op {op}: cell min reward fell {before:?} -> {after:?}"));
                    }
                }
                Ok(InsertDecision::Inserted) => inserts += 1,
                Ok(InsertDecision::RejectedNovelty { .. }) => novelty_rejects += 1,
                Ok(InsertDecision::RejectedValue) => value_rejects += 1,
                Err(e) => return outcome(false, format!("op {op}: {e}")),
            }
        }
        for (_, cell) in archive.cells() {
            if cell.elites.len() > 3 {
                return outcome(false, format!("op {op}: cell holds {}", cell.elites.len()));
            }
            for (i, a) in cell.elites.iter().enumerate() {
                for b in &cell.elites[i + 1..] {
                    let sim = ngram_similarity(&a.strategy.summary, &b.strategy.summary, 3);
                    if sim > 0.9 {
                        return outcome(false, format!("op {op}: intra-cell similarity {sim}"));
                    }
                }
            }
        }
        if op % 500 == 0 || op == 9_999 {
            let text = archive.to_jsonl().unwrap();
            let back = Archive::from_jsonl(&text).and_then(|a| a.to_jsonl());
            if back.as_deref().ok() != Some(text.as_str()) {
                return outcome(false, format!("op {op}: serialization round trip differs"));
            }
        }
    }
    outcome(
        true,
        format!(
            "10000 ops: {inserts} inserts, {replacements} replacements, {value_rejects}/{novelty_rejects} value/novelty rejections, {prunes} pruned, final size {}",
            archive.len()
        ),
    )
}

fn c4_loss_gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..50u64 {
        let mut rng = derived_rng(case, &["acceptance", "gradcheck"]);
        let mut model = CriticModel::new(CriticConfig {
            features: FeatureConfig { hash_dim: 12, ngram: 2, doc_head_tokens: 8 },
            hidden: rng.gen_range(2..6),
            output_scale: rng.gen_range(0.5..3.0),
            init_scale: 0.5,
            seed: case,
        })
        .unwrap();
        // Fresh heads start at zero; randomize every parameter.
        for i in 0..model.param_count() {
            model.set_param(i, rng.gen_range(-1.0..1.0));
        }
        let m = rng.gen_range(2..6);
        let feats: Vec<FeatureVector> = (0..m)
            .map(|_| {
                let mut map = BTreeMap::new();
                for _ in 0..5 {
                    map.insert(rng.gen_range(0..model.dim()) as u32, rng.gen_range(-1.0..1.0));
                }
                FeatureVector::from_map(map)
            })
            .collect();
        let mut targets = Vec::new();
        for i in 0..m {
            if rng.gen_bool(0.7) {
                targets.push((i, rng.gen_range(-3.0..3.0)));
            }
        }
        let mut pairs = vec![WeightedPair { plus: 0, minus: 1, weight: rng.gen_range(0.1..1.0) }];
        for _ in 0..rng.gen_range(0..4) {
            let (a, b) = (rng.gen_range(0..m), rng.gen_range(0..m));
            if a != b {
                pairs.push(WeightedPair { plus: a, minus: b, weight: rng.gen_range(0.1..1.0) });
            }
        }
        let lambda = rng.gen_range(0.0..1.0);
        let batch = LossBatch { features: feats.iter().collect(), targets, pairs };
        let (_, grads) = hybrid_loss_grad(&model, &batch, lambda, Stage::Full).unwrap();
        let eps = 1e-6;
        for i in 0..model.param_count() {
            let orig = model.param(i);
            model.set_param(i, orig + eps);
            let up = hybrid_loss(&model, &batch, lambda).unwrap().total;
            model.set_param(i, orig - eps);
            let down = hybrid_loss(&model, &batch, lambda).unwrap().total;
            model.set_param(i, orig);
            let numeric = (up - down) / (2.0 * eps);
            let analytic = model.grad_entry(&grads, i);
            // Parameters the batch never touches have zero gradient both ways.
            if numeric.abs().max(analytic.abs()) < 1e-7 {
                continue;
            }
            checked += 1;
            worst = worst.max(rel_err(analytic, numeric));
        }
    }
    let pair = [WeightedPair { plus: 0, minus: 1, weight: 1.0 }];
    let ln2 = loss_from_scores(&[1.7, 1.7], &[], &pair, 0.2).map(|(l, _)| l.pair).unwrap_or(f64::NAN);
    outcome(
        worst <= 1e-4 && ln2 == std::f64::consts::LN_2,
        format!("50 instances, {checked} gradient entries, max relative error {worst:.2e}; zero-margin pair loss {ln2}"),
    )
}

fn c5_critic_fidelity() -> Outcome {
    let critic_cfg = CriticConfig::default();
    let pool = labeling_pool(5, 27).unwrap();
    let mut rng = derived_rng(5, &["acceptance", "fidelity"]);
    // Known linear gain over the strategy's hashed features plus noise.
    let fc = &critic_cfg.features;
    let weights: Vec<f64> = (0..fc.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let truth: Vec<f64> = pool
        .iter()
        .map(|s| encode_strategy(fc, s).iter().map(|(i, v)| weights[i] * v).sum::<f64>())
        .collect();
    let spread = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max) - truth.iter().copied().fold(f64::INFINITY, f64::min);
    let noise = 0.02 * spread;

    let mut make = |seed: u64, queries: usize| -> OfflineData {
        let mut data = OfflineData::default();
        for inst in synthetic_dataset(&SyntheticSpec { queries, docs_per_query: 5, seed }) {
            let ctx = inst.context();
            let cid = ctx.id();
            let offset = rng.gen_range(-5.0..5.0);
            let mut gains = Vec::new();
            for (s, t) in pool.iter().zip(&truth) {
                let g = t + offset + noise * (rng.gen::<f64>() - 0.5) * 2.0;
                gains.push((s.id.clone(), g));
                data.labels.push(OfflineLabel { context_id: cid.clone(), strategy_id: s.id.clone(), gain: g });
            }
            gains.sort_by(|a, b| b.1.total_cmp(&a.1));
            for i in 0..5 {
                for j in i + 1..5 {
                    data.pairs.push(PreferencePair {
                        context_id: cid.clone(),
                        s_plus: gains[i].0.clone(),
                        s_minus: gains[j].0.clone(),
                        weight: 1.0 / (i + j + 2) as f64,
                    });
                }
            }
            for _ in 0..3 {
                let hi = rng.gen_range(0..3);
                let lo = gains.len() - 1 - rng.gen_range(0..3);
                data.pairs.push(PreferencePair {
                    context_id: cid.clone(),
                    s_plus: gains[hi].0.clone(),
                    s_minus: gains[lo].0.clone(),
                    weight: 1.0 / (hi + lo + 2) as f64,
                });
            }
            data.contexts.insert(cid, ctx);
        }
        for s in &pool {
            data.strategies.insert(s.id.clone(), s.clone());
        }
        data
    };
    let train = make(50, 30);
    let test = make(51, 10);

    let mut critic = CriticModel::new(critic_cfg).unwrap();
    let set = geo_evolve::critic::TrainingSet::from_offline(&train, &critic).unwrap();
    let cfg = TrainConfig { epochs: 30, freeze_epochs: 3, ..TrainConfig::default() };
    if let Err(e) = train_offline(&mut critic, &set, &cfg) {
        return outcome(false, format!("training failed: {e}"));
    }
    let r = ndcg_report(&critic, &test).unwrap();
    outcome(
        r.ndcg_at_1 >= 0.85 && r.ndcg_at_5 >= 0.95,
        format!("held-out {} contexts: NDCG@1 {:.4}, NDCG@3 {:.4}, NDCG@5 {:.4}", r.contexts, r.ndcg_at_1, r.ndcg_at_3, r.ndcg_at_5),
    )
}

fn c6_sibling_identity() -> Outcome {
    let mut rng = derived_rng(6, &["acceptance", "sibling"]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let parent = rng.gen_range(-10.0..10.0);
        let alpha = rng.gen_range(0.0..1.0);
        let children: Vec<SiblingChild> = (0..rng.gen_range(1..12))
            .map(|i| SiblingChild {
                strategy_id: format!("c{i}"),
                reward: rng.gen_range(-10.0..20.0),
                pnd: rng.gen_range(0.0..5.0),
            })
            .collect();
        let group = SiblingGroup { parent_id: "p".into(), parent_reward: parent, children };
        let adv = sibling_advantage(&group, alpha).unwrap();
        let lhs: f64 = adv
            .iter()
            .zip(&group.children)
            .map(|(a, c)| a - if c.reward - parent < 0.0 { c.pnd } else { 0.0 })
            .sum();
        let rhs = (1.0 - alpha) * group.children.iter().map(|c| c.reward - parent).sum::<f64>();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    let worked = SiblingGroup {
        parent_id: "p".into(),
        parent_reward: 0.5,
        children: vec![
            SiblingChild { strategy_id: "a".into(), reward: 0.7, pnd: 0.9 },
            SiblingChild { strategy_id: "b".into(), reward: 0.6, pnd: 0.9 },
            SiblingChild { strategy_id: "c".into(), reward: 0.4, pnd: 0.3 },
        ],
    };
    let a = sibling_advantage(&worked, 0.8).unwrap();
    let want = [0.44 / 3.0, 0.14 / 3.0, 0.44 / 3.0];
    let worked_ok = a.iter().zip(want).all(|(x, w)| (x - w).abs() <= 1e-9);
    outcome(
        worst <= 1e-12 && worked_ok,
        format!("1000 groups, max identity residual {worst:.1e}; worked example {:.9?}", a),
    )
}

fn c7_awr_effect() -> Outcome {
    let policy = EvolverPolicy::default();
    let seeds = seed_genotypes();
    let instances = synthetic_dataset(&SyntheticSpec { queries: 6, docs_per_query: 5, seed: 7 });
    let mut rng = derived_rng(7, &["acceptance", "awr"]);
    let mut checked = 0;
    for trial in 0..20 {
        let mut exps = Vec::new();
        let mut target = None;
        for inst in &instances {
            let ctx = inst.context();
            let parent = seeds.choose(&mut rng).unwrap();
            let has_b = rng.gen_bool(0.5);
            let features = policy_features(&ctx, &parent.genotype, has_b);
            let mask = operator_mask(&parent.genotype, has_b);
            let allowed: Vec<usize> = (0..CATALOG.len()).filter(|&i| mask[i]).collect();
            let best = *target.get_or_insert_with(|| {
                // Pick an operator every parent can take.
                let common: Vec<usize> = (0..12).filter(|&i| seeds.iter().all(|s| CATALOG[i].is_applicable(&s.genotype))).collect();
                *common.choose(&mut rng).unwrap()
            });
            exps.push(Experience { features: features.clone(), mask: mask.clone(), operator: CATALOG[best], advantage: 1.5 });
            for _ in 0..3 {
                let other = *allowed.iter().filter(|&&i| i != best).collect::<Vec<_>>().choose(&mut rng).unwrap();
                exps.push(Experience {
                    features: features.clone(),
                    mask: mask.clone(),
                    operator: CATALOG[*other],
                    advantage: rng.gen_range(-2.0..1.0),
                });
            }
        }
        let best = target.unwrap();
        let mut updated = policy.clone();
        if let Err(e) = awr_update(&mut updated, &exps, 1.0, 2e-4 * (1 + trial) as f64) {
            return outcome(false, format!("trial {trial}: {e}"));
        }
        for e in &exps {
            let before = policy.probabilities(&e.features, &e.mask)[best];
            let after = updated.probabilities(&e.features, &e.mask)[best];
            if !(after > before) {
                return outcome(false, format!("trial {trial}: p({}) {before} -> {after}", CATALOG[best]));
            }
            checked += 1;
        }
    }
    outcome(true, format!("20 batches, probability of the best operator rose at all {checked} contexts"))
}

struct SeedRun {
    full_best: f64,
    half_best: f64,
    seed_best: f64,
    max_calls: usize,
    full: Option<Coevolution<SimulatedEngine>>,
}

fn run_for(cfg: RunConfig) -> Coevolution<SimulatedEngine> {
    let instances = synthetic_dataset(&cfg.dataset_spec());
    let engine = SimulatedEngine::new(cfg.simulation_params()).unwrap();
    let mut run = Coevolution::new(cfg, Evaluator::new(engine), instances).unwrap();
    run.run(None).unwrap();
    run
}

fn archive_best(run: &Coevolution<SimulatedEngine>) -> f64 {
    let checker = Evaluator::new(SimulatedEngine::new(run.config.simulation_params()).unwrap());
    let archived: Vec<Strategy> = run.archive.strategies().cloned().collect();
    verified_best(&checker, &run.instances, &archived).unwrap().map_or(f64::NEG_INFINITY, |b| b.1)
}

fn seed_runs() -> Vec<SeedRun> {
    (0..5u64)
        .map(|seed| {
            let full = run_for(RunConfig { seed, ..RunConfig::default() });
            let half = run_for(RunConfig { seed, k_top: 2, k_rand: 2, ..RunConfig::default() });
            let checker = Evaluator::new(SimulatedEngine::new(full.config.simulation_params()).unwrap());
            let seed_best = verified_best(&checker, &full.instances, &seed_genotypes()).unwrap().unwrap().1;
            SeedRun {
                full_best: archive_best(&full),
                half_best: archive_best(&half),
                seed_best,
                max_calls: full.reports.iter().map(|r| r.ge_calls).max().unwrap_or(0),
                full: Some(full),
            }
        })
        .collect()
}

fn c8_budget(runs: &[SeedRun]) -> Outcome {
    let max_calls = runs.iter().map(|r| r.max_calls).max().unwrap();
    let full: f64 = runs.iter().map(|r| r.full_best).sum::<f64>() / runs.len() as f64;
    let half: f64 = runs.iter().map(|r| r.half_best).sum::<f64>() / runs.len() as f64;
    let per_seed: Vec<String> = runs.iter().map(|r| format!("{:.2}", r.half_best / r.full_best)).collect();
    outcome(
        max_calls <= 8 && half >= 0.9 * full,
        format!(
            "max GE calls per iteration {max_calls}; half/full mean best {half:.2}/{full:.2} = {:.3} (per seed {})",
            half / full,
            per_seed.join(" ")
        ),
    )
}

fn c9_regret() -> Outcome {
    let cfg = RunConfig { seed: 0, iterations: 1600, ..RunConfig::default() };
    let instances = synthetic_dataset(&cfg.dataset_spec());
    let oracle = RegretOracle::build(&Evaluator::new(SimulatedEngine::new(cfg.simulation_params()).unwrap()), &instances).unwrap();
    let engine = SimulatedEngine::new(cfg.simulation_params()).unwrap();
    let mut run = Coevolution::new(cfg, Evaluator::new(engine), instances).unwrap();
    run.enable_regret(oracle);
    if let Err(e) = run.run(None) {
        return outcome(false, format!("run failed: {e}"));
    }
    let cum = |t: usize| run.reports[t - 1].cumulative_regret.unwrap();
    let (r100, r400, r1600) = (cum(100), cum(400), cum(1600));
    let (a100, a400, a1600) = (r100 / 100.0, r400 / 400.0, r1600 / 1600.0);
    let pass = r400 <= 2.5 * r100 && r1600 <= 2.5 * r400 && a100 > a400 && a400 > a1600;
    outcome(
        pass,
        format!(
            "cumulative {r100:.1}/{r400:.1}/{r1600:.1}, ratios {:.3} {:.3}, average {a100:.3} > {a400:.3} > {a1600:.3}",
            r400 / r100,
            r1600 / r400
        ),
    )
}

fn c10_gain(runs: &[SeedRun]) -> Outcome {
    let gains: Vec<f64> = runs.iter().map(|r| r.full_best / r.seed_best - 1.0).collect();
    let wins = gains.iter().filter(|g| **g >= 0.10).count();
    let shown: Vec<String> = runs
        .iter()
        .zip(&gains)
        .map(|(r, g)| format!("{:.2}->{:.2} ({:+.0}%)", r.seed_best, r.full_best, 100.0 * g))
        .collect();
    outcome(wins >= 4, format!("{wins}/5 seeds gain >= 10%: {}", shown.join(", ")))
}

fn c11_planner(run: &Coevolution<SimulatedEngine>) -> Outcome {
    let engine = SimulatedEngine::new(run.config.simulation_params()).unwrap();
    let cases = synthetic_dataset(&SyntheticSpec { queries: 100, docs_per_query: 5, seed: 1100 });
    let (mut improved, mut max_len) = (0, 0);
    for (i, inst) in cases.iter().enumerate() {
        let target = inst.candidates.target();
        let (doc, trace) = match optimize(&inst.query, target, &run.archive, &run.critic, &engine, 25, 3) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("case {i}: {e}")),
        };
        let ids: std::collections::BTreeSet<&str> = trace.steps.iter().map(|s| s.strategy_id.as_str()).collect();
        if ids.len() != trace.steps.len() {
            return outcome(false, format!("case {i}: a strategy was reused"));
        }
        if trace.steps.len() > 3 {
            return outcome(false, format!("case {i}: {} steps", trace.steps.len()));
        }
        max_len = max_len.max(trace.steps.len());
        let constant = |_: &Context, _: &Strategy| 1.0;
        let (_, flat) = optimize_with_pool(&inst.query, target, run.archive.top_k_by_pnd(25), &constant, &engine, 3).unwrap();
        if flat.steps.len() != 1 {
            return outcome(false, format!("case {i}: constant critic ran {} steps", flat.steps.len()));
        }
        let t = inst.candidates.target_citation();
        let before = compute_impressions(&engine.synthesize_answer(&inst.query, &inst.candidates).unwrap(), t).overall;
        let after_set = inst.candidates.with_target_text(&doc.text);
        let after = compute_impressions(&engine.synthesize_answer(&inst.query, &after_set).unwrap(), t).overall;
        if after >= before {
            improved += 1;
        }
    }
    outcome(
        improved >= 90,
        format!("100 cases: no reuse, longest trace {max_len}, constant critic always 1 step, {improved}/100 at or above baseline"),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "iterations = 12\n").unwrap();
    std::fs::write(tmp.path().join("q.txt"), "How do heat pumps save energy in winter?").unwrap();
    std::fs::write(tmp.path().join("d.txt"), "Heat pumps move heat. They need electricity. Many homes use them.").unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut snaps = Vec::new();
    for name in ["a", "b"] {
        let run = tmp.path().join(name);
        let opt = tmp.path().join(format!("{name}-opt"));
        let mut sink = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(["geo", "--config", &s(&cfg), "--seed", "42", "--out", &s(&run), "evolve"], &mut sink, &mut err);
        if code != 0 {
            return outcome(false, format!("evolve exit {code}: {}", String::from_utf8_lossy(&err)));
        }
        let archive = run.join("archive.jsonl");
        let q = tmp.path().join("q.txt");
        let d = tmp.path().join("d.txt");
        let code = run_cli(
            ["geo", "--seed", "42", "--out", &s(&opt), "optimize", "--query", &s(&q), "--doc", &s(&d), "--archive", &s(&archive)],
            &mut sink,
            &mut err,
        );
        if code != 0 {
            return outcome(false, format!("optimize exit {code}: {}", String::from_utf8_lossy(&err)));
        }
        snaps.push((snapshot(&run), snapshot(&opt)));
    }
    let files = snaps[0].0.len() + snaps[0].1.len();
    let same = snaps[0] == snaps[1];
    let differing: Vec<&String> = snaps[0].0.iter().filter(|(k, v)| snaps[1].0.get(*k) != Some(v)).map(|(k, _)| k).collect();
    outcome(same, format!("{files} artifacts compared, byte-identical: {same} {differing:?}"))
}

/// `ACCEPTANCE_ONLY=3,9` restricts the run to the listed criteria.
fn selected() -> Option<Vec<u32>> {
    let v = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
}

fn main() {
    let only = selected();
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut results: Vec<(u32, Outcome, Duration)> = Vec::new();
    let mut record = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let o = f();
        let d = t.elapsed();
        println!(
            "criterion {id:>2} {:<4} {name:<28} {:>8.2}s  {}",
            if o.pass { "PASS" } else { "FAIL" },
            d.as_secs_f64(),
            o.detail
        );
        results.push((id, o, d));
    };
    record(1, "metric oracle", &mut c1_metric_oracle);
    record(2, "sensitivity formula", &mut c2_sensitivity);
    record(3, "archive fuzz", &mut c3_archive_fuzz);
    record(4, "loss correctness", &mut c4_loss_gradients);
    record(5, "critic fidelity", &mut c5_critic_fidelity);
    record(6, "sibling-advantage identity", &mut c6_sibling_identity);
    record(7, "AWR effect", &mut c7_awr_effect);
    let mut runs = Vec::new();
    if [8, 10, 11].iter().any(|&i| wanted(i)) {
        let t = Instant::now();
        runs = seed_runs();
        println!("(shared 5-seed full/half-budget runs took {:.2}s)", t.elapsed().as_secs_f64());
    }
    record(8, "budget", &mut || c8_budget(&runs));
    record(9, "regret", &mut c9_regret);
    record(10, "co-evolution gain", &mut || c10_gain(&runs));
    let trained = runs.first_mut().and_then(|r| r.full.take());
    record(11, "planner contracts", &mut || c11_planner(trained.as_ref().unwrap()));
    record(12, "determinism", &mut c12_determinism);

    let limits = [(1, 5.0), (3, 30.0), (5, 60.0), (9, 300.0)];
    let mut failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    for (id, secs) in limits {
        if let Some(r) = results.iter().find(|r| r.0 == id) {
            if r.2.as_secs_f64() > secs {
                println!("criterion {id:>2} exceeded its {secs}s runtime limit");
                failed.push(id);
            }
        }
    }
    failed.sort();
    failed.dedup();
    if failed.is_empty() {
        println!("acceptance: all {} selected criteria passed", results.len());
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
