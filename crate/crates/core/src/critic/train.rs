//! Offline label construction, staged offline training and online calibration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::loss::{hybrid_loss, hybrid_loss_grad, pair_weight, LossBatch, LossParts, WeightedPair};
use super::model::{AdamParams, CriticModel, Stage};
use crate::engine::{Engine, EvalOutcome, Evaluator};
use crate::error::{Error, Result};
use crate::genotype::{RewardSource, Strategy};
use crate::types::{Context, Instance};
use crate::util::{cmp_desc, derived_rng, Rng as StdRng};

/// Ranks covered by the dense pair block.
pub const DENSE_TOP: usize = 5;
/// Size of the top and bottom bands the contrastive pairs are drawn from.
pub const CONTRASTIVE_BAND: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineLabel {
    pub context_id: String,
    pub strategy_id: String,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub context_id: String,
    pub s_plus: String,
    pub s_minus: String,
    pub weight: f64,
}

/// Labels and pairs for offline alignment, plus what they refer to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfflineData {
    pub labels: Vec<OfflineLabel>,
    pub pairs: Vec<PreferencePair>,
    pub unevaluated: usize,
    pub contexts: BTreeMap<String, Context>,
    pub strategies: BTreeMap<String, Strategy>,
}

/// Preference pairs among items with the given gains and ids: every
/// strictly ordered pair within the top `DENSE_TOP` ranks, plus up to
/// `contrastive` draws of a top-band item against a bottom-band item.
/// Ranks are by descending gain, ties by id.
pub fn rank_pairs<R: Rng + ?Sized>(
    items: &[(&str, f64)],
    contrastive: usize,
    rng: &mut R,
) -> Vec<WeightedPair> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| cmp_desc(items[a].1, items[b].1).then(items[a].0.cmp(items[b].0)));
    let mut pairs = Vec::new();
    let top = order.len().min(DENSE_TOP);
    for a in 0..top {
        for b in a + 1..top {
            let (i, j) = (order[a], order[b]);
            if items[i].1 > items[j].1 {
                pairs.push(WeightedPair {
                    plus: i,
                    minus: j,
                    weight: pair_weight(a + 1, b + 1),
                });
            }
        }
    }
    let n = order.len();
    let band = n.min(CONTRASTIVE_BAND);
    if n >= 2 {
        for _ in 0..contrastive {
            let a = rng.gen_range(0..band);
            let b = n - band + rng.gen_range(0..band);
            let (i, j) = (order[a], order[b]);
            if a < b && items[i].1 > items[j].1 {
                pairs.push(WeightedPair {
                    plus: i,
                    minus: j,
                    weight: pair_weight(a + 1, b + 1),
                });
            }
        }
    }
    pairs
}

/// Evaluates every strategy on every instance and derives ranked pairs.
pub fn build_offline_labels<E: Engine, R: Rng + ?Sized>(
    evaluator: &Evaluator<E>,
    instances: &[Instance],
    strategies: &[Strategy],
    contrastive_per_context: usize,
    rng: &mut R,
) -> Result<OfflineData> {
    if strategies.len() < 2 {
        return Err(Error::Validation("offline labels need at least two strategies".into()));
    }
    let mut data = OfflineData::default();
    for s in strategies {
        data.strategies.insert(s.id.clone(), s.clone());
    }
    for inst in instances {
        let ctx = inst.context();
        let cid = ctx.id();
        let mut local: Vec<(&str, f64)> = Vec::new();
        for s in strategies {
            match evaluator.evaluate(&ctx, s, &inst.candidates)? {
                EvalOutcome::Reward(g) => local.push((&s.id, g)),
                EvalOutcome::Unevaluated(_) => data.unevaluated += 1,
            }
        }
        for (sid, g) in &local {
            data.labels.push(OfflineLabel {
                context_id: cid.clone(),
                strategy_id: sid.to_string(),
                gain: *g,
            });
        }
        for p in rank_pairs(&local, contrastive_per_context, rng) {
            data.pairs.push(PreferencePair {
                context_id: cid.clone(),
                s_plus: local[p.plus].0.to_string(),
                s_minus: local[p.minus].0.to_string(),
                weight: p.weight,
            });
        }
        data.contexts.insert(cid, ctx);
    }
    Ok(data)
}

/// One context's examples with local pair indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGroup {
    pub context_id: String,
    pub strategy_ids: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub gains: Vec<f64>,
    pub pairs: Vec<WeightedPair>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub groups: Vec<ContextGroup>,
}

impl TrainingSet {
    pub fn from_offline(data: &OfflineData, model: &CriticModel) -> Result<Self> {
        let mut groups: BTreeMap<&str, ContextGroup> = BTreeMap::new();
        for l in &data.labels {
            let ctx = data.contexts.get(&l.context_id).ok_or_else(|| {
                Error::Validation(format!("label refers to unknown context `{}`", l.context_id))
            })?;
            let s = data.strategies.get(&l.strategy_id).ok_or_else(|| {
                Error::Validation(format!("label refers to unknown strategy `{}`", l.strategy_id))
            })?;
            let g = groups.entry(&l.context_id).or_insert_with(|| ContextGroup {
                context_id: l.context_id.clone(),
                strategy_ids: Vec::new(),
                features: Vec::new(),
                gains: Vec::new(),
                pairs: Vec::new(),
            });
            g.strategy_ids.push(s.id.clone());
            g.features.push(model.featurize(ctx, s));
            g.gains.push(l.gain);
        }
        for p in &data.pairs {
            let g = groups.get_mut(p.context_id.as_str()).ok_or_else(|| {
                Error::Validation(format!("pair refers to unknown context `{}`", p.context_id))
            })?;
            let find = |id: &str| {
                g.strategy_ids.iter().position(|s| s == id).ok_or_else(|| {
                    Error::Validation(format!("pair refers to unlabeled strategy `{id}`"))
                })
            };
            let (plus, minus) = (find(&p.s_plus)?, find(&p.s_minus)?);
            g.pairs.push(WeightedPair {
                plus,
                minus,
                weight: p.weight,
            });
        }
        Ok(TrainingSet {
            groups: groups.into_values().collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(|g| g.gains.is_empty())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.gains.len()).sum()
    }

    fn batch<'a>(&'a self, which: &[usize]) -> LossBatch<'a> {
        let mut b = LossBatch::default();
        for &gi in which {
            let g = &self.groups[gi];
            let off = b.features.len();
            for (i, (x, y)) in g.features.iter().zip(&g.gains).enumerate() {
                b.features.push(x);
                b.targets.push((off + i, *y));
            }
            b.pairs.extend(g.pairs.iter().map(|p| WeightedPair {
                plus: p.plus + off,
                minus: p.minus + off,
                weight: p.weight,
            }));
        }
        b
    }

    pub fn full_batch(&self) -> LossBatch<'_> {
        let all: Vec<usize> = (0..self.groups.len()).collect();
        self.batch(&all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Contexts per mini-batch.
    pub batch_size: usize,
    pub lr: f64,
    pub lambda: f64,
    /// Leading epochs that train only the output layer.
    pub freeze_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2,
            batch_size: 2,
            lr: 1e-3,
            lambda: 0.2,
            freeze_epochs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub stage: Stage,
    pub loss: LossParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: LossParts,
    pub epochs: Vec<EpochReport>,
}

impl TrainReport {
    pub fn final_loss(&self) -> LossParts {
        self.epochs.last().map(|e| e.loss).unwrap_or(self.initial_loss)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for e in &self.epochs {
            writeln!(f, "{}", serde_json::to_string(e)?).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

fn check_finite(loss: &LossParts, epoch: usize, step: usize) -> Result<()> {
    if loss.total.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!(
            "loss became non-finite at epoch {epoch}, step {step} (pair {}, reg {})",
            loss.pair, loss.reg
        )))
    }
}

fn run_epoch(
    model: &mut CriticModel,
    set: &TrainingSet,
    cfg: &TrainConfig,
    stage: Stage,
    epoch: usize,
    rng: &mut StdRng,
) -> Result<()> {
    let adam = AdamParams::with_lr(cfg.lr);
    let mut order: Vec<usize> = (0..set.groups.len()).collect();
    order.shuffle(rng);
    for (step, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
        let batch = set.batch(chunk);
        if batch.is_empty() {
            continue;
        }
        let (loss, grads) = hybrid_loss_grad(model, &batch, cfg.lambda, stage)?;
        check_finite(&loss, epoch, step)?;
        if !grads.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient at epoch {epoch}, step {step}"
            )));
        }
        model.apply_gradients(&grads, &adam, stage);
    }
    Ok(())
}

/// Staged mini-batch training; the first `freeze_epochs` epochs update only
/// the output layer.
pub fn train_offline(model: &mut CriticModel, set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if set.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    let mut rng = derived_rng(cfg.seed, &["critic-train"]);
    let initial_loss = hybrid_loss(model, &set.full_batch(), cfg.lambda)?;
    check_finite(&initial_loss, 0, 0)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let stage = if epoch < cfg.freeze_epochs {
            Stage::Warmup
        } else {
            Stage::Full
        };
        run_epoch(model, set, cfg, stage, epoch, &mut rng)?;
        let loss = hybrid_loss(model, &set.full_batch(), cfg.lambda)?;
        check_finite(&loss, epoch, usize::MAX)?;
        log::debug!("critic epoch {epoch} ({stage:?}): loss {:.6}", loss.total);
        epochs.push(EpochReport { epoch, stage, loss });
    }
    Ok(TrainReport {
        initial_loss,
        epochs,
    })
}

/// A GE-labeled experience used for online calibration.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationSample<'a> {
    pub context: &'a Context,
    pub strategy: &'a Strategy,
    pub reward: f64,
    pub source: RewardSource,
}

/// Groups samples by context and rebuilds pairs from their rewards.
pub fn calibration_set(
    model: &CriticModel,
    samples: &[CalibrationSample<'_>],
    contrastive: usize,
    rng: &mut StdRng,
) -> Result<TrainingSet> {
    let mut groups: BTreeMap<String, ContextGroup> = BTreeMap::new();
    for s in samples {
        if s.source != RewardSource::Ge {
            return Err(Error::Contract(format!(
                "calibration sample for `{}` carries a critic-sourced reward",
                s.strategy.id
            )));
        }
        if !s.reward.is_finite() {
            return Err(Error::Validation(format!("non-finite reward for `{}`", s.strategy.id)));
        }
        let cid = s.context.id();
        let g = groups.entry(cid.clone()).or_insert_with(|| ContextGroup {
            context_id: cid,
            strategy_ids: Vec::new(),
            features: Vec::new(),
            gains: Vec::new(),
            pairs: Vec::new(),
        });
        g.strategy_ids.push(s.strategy.id.clone());
        g.features.push(model.featurize(s.context, s.strategy));
        g.gains.push(s.reward);
    }
    for g in groups.values_mut() {
        let items: Vec<(&str, f64)> = g
            .strategy_ids
            .iter()
            .map(String::as_str)
            .zip(g.gains.iter().copied())
            .collect();
        g.pairs = rank_pairs(&items, contrastive, rng);
    }
    Ok(TrainingSet {
        groups: groups.into_values().collect(),
    })
}

/// Full-stage gradient passes on GE-labeled samples. Returns the loss after
/// calibration, or `None` for an empty buffer (model untouched).
pub fn calibrate_online(
    model: &mut CriticModel,
    samples: &[CalibrationSample<'_>],
    cfg: &TrainConfig,
) -> Result<Option<LossParts>> {
    let mut rng = derived_rng(cfg.seed, &["critic-calibrate", &model.steps.to_string()]);
    let set = calibration_set(model, samples, CONTRASTIVE_BAND, &mut rng)?;
    if set.is_empty() {
        return Ok(None);
    }
    for epoch in 0..cfg.epochs {
        run_epoch(model, &set, cfg, Stage::Full, epoch, &mut rng)?;
    }
    Ok(Some(hybrid_loss(model, &set.full_batch(), cfg.lambda)?))
}
