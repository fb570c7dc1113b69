//! Candidate generation and the operator policy that learns which edits pay off.
//!
//! The policy is a linear softmax over the fourteen catalog operators. It is
//! trained by advantage-weighted regression on sibling-relative advantages.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::ChatClient;
use crate::error::{Error, Result};
use crate::genotype::{apply_operator, Descriptor, Genotype, Lever, OperatorId, Strategy, CATALOG};
use crate::types::Context;
use crate::util::hash_str;

/// Number of hashed query-term buckets in the policy features.
const QUERY_BUCKETS: usize = 8;
/// Upper bound on exp(A/β) in the regression weights.
pub const AWR_WEIGHT_CLIP: f64 = 20.0;

pub const EVOLVER_SYSTEM_PROMPT: &str = r#"You are a prompt evolution agent for GEO. You must evolve a parent strategy (or combine two parents) into a better STRUCTURED GENOTYPE JSON (I/C/R/F/T).

1) Choose an operator_id from the provided catalog.
2) Produce a child_genotype JSON that results from applying that operator.

Important constraints:
- The output MUST be valid JSON (one object per line).
- The child genotype MUST preserve the I/C/R/F/T structure.
- If choosing a Crossover operator (starts with "cx_"): You MUST conceptually combine Parent A and Parent B.
- If Parent B is NOT provided: Do NOT choose any "cx_*" operator.
- Prefer DIVERSITY: Avoid repeating the same operator across candidates."#;

/// Length of the policy feature vector.
pub fn feature_dim() -> usize {
    1 + Descriptor::one_hot_len() + 4 + 1 + QUERY_BUCKETS + 1
}

/// Dense, non-negative policy features of a (context, parent) pair.
pub fn policy_features(ctx: &Context, parent: &Genotype, has_second_parent: bool) -> Vec<f64> {
    let mut f = vec![0.0; feature_dim()];
    f[0] = 1.0;
    let mut at = 1;
    for i in crate::genotype::descriptor(parent).one_hot_indices() {
        f[at + i] = 1.0;
    }
    at += Descriptor::one_hot_len();
    let levers = parent.levers();
    for (k, lever) in [Lever::Statistic, Lever::Quote, Lever::Source, Lever::Keyword]
        .iter()
        .enumerate()
    {
        if levers.contains(lever) {
            f[at + k] = 1.0;
        }
    }
    at += 4;
    if has_second_parent {
        f[at] = 1.0;
    }
    at += 1;
    let terms = crate::engine::simulated::query_terms(&ctx.query.text);
    if !terms.is_empty() {
        let share = 1.0 / terms.len() as f64;
        for t in &terms {
            f[at + (hash_str(&[t]) % QUERY_BUCKETS as u64) as usize] += share;
        }
    }
    at += QUERY_BUCKETS;
    f[at] = (1.0 + ctx.document.word_count() as f64).ln() / 10.0;
    f
}

/// Operators the policy may choose for `parent`: applicable mutations, plus
/// crossovers only when a second parent exists.
pub fn operator_mask(parent: &Genotype, has_second_parent: bool) -> Vec<bool> {
    CATALOG
        .iter()
        .map(|op| {
            if op.is_crossover() {
                has_second_parent
            } else {
                op.is_applicable(parent)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolverPolicy {
    /// Row-major: `weights[op * dim + j]`.
    weights: Vec<f64>,
    dim: usize,
    pub temperature: f64,
}

impl Default for EvolverPolicy {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl EvolverPolicy {
    /// All-zero weights: uniform over whatever the mask allows.
    pub fn uniform(temperature: f64) -> Self {
        EvolverPolicy {
            weights: vec![0.0; CATALOG.len() * feature_dim()],
            dim: feature_dim(),
            temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config {
                key: "evolver_temperature".into(),
                message: format!("must be positive, got {}", self.temperature),
            });
        }
        if self.dim != feature_dim() || self.weights.len() != CATALOG.len() * self.dim {
            return Err(Error::Validation("policy weight shape does not match the feature layout".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("policy weights are not finite".into()));
        }
        Ok(())
    }

    pub fn weight(&self, op: OperatorId, j: usize) -> f64 {
        self.weights[op.index() * self.dim + j]
    }

    pub fn set_weight(&mut self, op: OperatorId, j: usize, value: f64) {
        self.weights[op.index() * self.dim + j] = value;
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        assert_eq!(features.len(), self.dim, "policy feature length");
        (0..CATALOG.len())
            .map(|k| {
                let row = &self.weights[k * self.dim..(k + 1) * self.dim];
                row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() / self.temperature
            })
            .collect()
    }

    /// Softmax over unmasked operators; masked entries are exactly 0.
    /// An all-false mask yields all zeros.
    pub fn probabilities(&self, features: &[f64], mask: &[bool]) -> Vec<f64> {
        let logits = self.logits(features);
        let max = logits
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logits
            .iter()
            .zip(mask)
            .map(|(l, m)| if *m { (l - max).exp() } else { 0.0 })
            .collect();
        let z: f64 = p.iter().sum();
        if z > 0.0 {
            for v in &mut p {
                *v /= z;
            }
        }
        p
    }

    pub fn sample<R: Rng + ?Sized>(&self, features: &[f64], mask: &[bool], rng: &mut R) -> Option<OperatorId> {
        let p = self.probabilities(features, mask);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (k, pk) in p.iter().enumerate() {
            if *pk > 0.0 {
                acc += pk;
                last = Some(CATALOG[k]);
                if u < acc {
                    return last;
                }
            }
        }
        last
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: EvolverPolicy = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalOrigin {
    Policy,
    Symbolic,
    Remote,
}

/// A candidate child with what is needed to credit the operator later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub strategy: Strategy,
    pub operator: OperatorId,
    pub origin: ProposalOrigin,
    pub parent_id: String,
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
}

fn second_parent<'a, R: Rng + ?Sized>(parents: &'a [Strategy], i: usize, rng: &mut R) -> Option<&'a Strategy> {
    let others: Vec<&Strategy> = parents
        .iter()
        .enumerate()
        .filter(|(j, p)| *j != i && p.id != parents[i].id)
        .map(|(_, p)| p)
        .collect();
    others.choose(rng).copied()
}

/// Draws `n_policy` children through the policy and `n_symbolic` through
/// uniformly random applicable operators, cycling over `parents`. Children
/// whose summary repeats an earlier one in the batch are dropped. Ids are
/// `{id_prefix}-{k}` with `k` counting kept children.
pub fn propose_candidates<R: Rng + ?Sized>(
    policy: &EvolverPolicy,
    ctx: &Context,
    parents: &[Strategy],
    counts: (usize, usize),
    id_prefix: &str,
    rng: &mut R,
) -> Vec<Proposal> {
    let mut out: Vec<Proposal> = Vec::new();
    if parents.is_empty() {
        return out;
    }
    let mut seen: HashSet<String> = HashSet::new();
    let (n_policy, n_symbolic) = counts;
    for draw in 0..n_policy + n_symbolic {
        let i = draw % parents.len();
        let a = &parents[i];
        let b = second_parent(parents, i, rng);
        let features = policy_features(ctx, &a.genotype, b.is_some());
        let mask = operator_mask(&a.genotype, b.is_some());
        let (op, origin) = if draw < n_policy {
            match policy.sample(&features, &mask, rng) {
                Some(op) => (op, ProposalOrigin::Policy),
                None => continue,
            }
        } else {
            let allowed: Vec<OperatorId> = CATALOG
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(op, _)| *op)
                .collect();
            match allowed.choose(rng) {
                Some(op) => (*op, ProposalOrigin::Symbolic),
                None => continue,
            }
        };
        let second = if op.is_crossover() { b } else { None };
        let genotype = match apply_operator(op, &a.genotype, second.map(|s| &s.genotype), rng) {
            Ok(g) => g,
            Err(e) => {
                log::debug!("skipping {op} on `{}`: {e}", a.id);
                continue;
            }
        };
        let id = format!("{id_prefix}-{:02}", out.len());
        let child = Strategy::child(id, genotype, a, second, op);
        if !seen.insert(child.summary.clone()) {
            continue;
        }
        out.push(Proposal {
            strategy: child,
            operator: op,
            origin,
            parent_id: a.id.clone(),
            features,
            mask,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiblingChild {
    pub strategy_id: String,
    pub reward: f64,
    pub pnd: f64,
}

/// Children of one parent evaluated in the same iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiblingGroup {
    pub parent_id: String,
    pub parent_reward: f64,
    pub children: Vec<SiblingChild>,
}

/// A_i = Δ_i − α·mean(Δ) + 1[Δ_i < 0]·pnd_i with Δ_i = r_i − r_parent and the
/// mean taken over every child, `i` included.
pub fn sibling_advantage(group: &SiblingGroup, alpha: f64) -> Result<Vec<f64>> {
    if group.children.is_empty() {
        return Err(Error::Validation(format!(
            "sibling group of `{}` has no children",
            group.parent_id
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config {
            key: "alpha_sib".into(),
            message: format!("must lie in [0, 1], got {alpha}"),
        });
    }
    if !group.parent_reward.is_finite()
        || group.children.iter().any(|c| !c.reward.is_finite() || !c.pnd.is_finite())
    {
        return Err(Error::Validation(format!(
            "sibling group of `{}` has a non-finite reward",
            group.parent_id
        )));
    }
    let deltas: Vec<f64> = group
        .children
        .iter()
        .map(|c| c.reward - group.parent_reward)
        .collect();
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    Ok(deltas
        .iter()
        .zip(&group.children)
        .map(|(d, c)| d - alpha * mean + if *d < 0.0 { c.pnd } else { 0.0 })
        .collect())
}

/// One operator choice and the advantage it earned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub operator: OperatorId,
    pub advantage: f64,
}

pub fn awr_weight(advantage: f64, beta: f64) -> f64 {
    (advantage / beta).exp().min(AWR_WEIGHT_CLIP)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwrReport {
    /// Weighted negative log-likelihood before the step.
    pub loss: f64,
    pub experiences: usize,
}

/// One gradient step on −(1/N)·Σ w_i·log π(op_i | f_i) with
/// w_i = min(exp(A_i/β), 20). The policy is left untouched on error.
pub fn awr_update(
    policy: &mut EvolverPolicy,
    experiences: &[Experience],
    beta: f64,
    lr: f64,
) -> Result<Option<AwrReport>> {
    if !(beta > 0.0) {
        return Err(Error::Config {
            key: "beta".into(),
            message: format!("must be positive, got {beta}"),
        });
    }
    if experiences.is_empty() {
        return Ok(None);
    }
    let dim = policy.dim;
    let mut grad = vec![0.0; policy.weights.len()];
    let mut loss = 0.0;
    let n = experiences.len() as f64;
    for (i, e) in experiences.iter().enumerate() {
        if !e.advantage.is_finite() || e.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!(
                "experience {i} ({}) has advantage {} or non-finite features",
                e.operator, e.advantage
            )));
        }
        if e.features.len() != dim || e.mask.len() != CATALOG.len() {
            return Err(Error::Validation(format!("experience {i} has the wrong shape")));
        }
        let k = e.operator.index();
        if !e.mask[k] {
            return Err(Error::Validation(format!(
                "experience {i} chose masked operator {}",
                e.operator
            )));
        }
        let w = awr_weight(e.advantage, beta);
        let p = policy.probabilities(&e.features, &e.mask);
        loss -= w * p[k].max(f64::MIN_POSITIVE).ln() / n;
        for (op, pk) in p.iter().enumerate() {
            let coef = w * ((op == k) as u8 as f64 - pk) / (policy.temperature * n);
            if coef == 0.0 {
                continue;
            }
            let row = &mut grad[op * dim..(op + 1) * dim];
            for (g, x) in row.iter_mut().zip(&e.features) {
                *g += coef * x;
            }
        }
    }
    let updated: Vec<f64> = policy
        .weights
        .iter()
        .zip(&grad)
        .map(|(w, g)| w + lr * g)
        .collect();
    if let Some(j) = updated.iter().position(|w| !w.is_finite()) {
        return Err(Error::Divergence(format!(
            "policy weight {j} became non-finite (lr {lr}, beta {beta}, loss {loss})"
        )));
    }
    policy.weights = updated;
    Ok(Some(AwrReport {
        loss,
        experiences: experiences.len(),
    }))
}

/// One parsed line of a remote proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteAction {
    pub operator_id: OperatorId,
    pub child_genotype: Genotype,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemoteProposal {
    pub actions: Vec<RemoteAction>,
    /// Lines that were not JSON, named an unknown operator, or carried an
    /// invalid genotype.
    pub dropped: usize,
    /// Crossover actions sent although no second parent was supplied.
    pub rejected_crossover: usize,
}

impl RemoteProposal {
    /// True when the reply held no usable action.
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

pub fn render_operator_catalog() -> String {
    CATALOG
        .iter()
        .map(|op| format!("- {}: {}", op.name(), op.description()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn content_summary(text: &str) -> String {
    const WORDS: usize = 80;
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut s = words[..words.len().min(WORDS)].join(" ");
    if words.len() > WORDS {
        s.push_str(" ...");
    }
    s
}

pub fn evolver_user_message(
    ctx: &Context,
    parent_a: &Genotype,
    parent_b: Option<&Genotype>,
    n: usize,
) -> Result<String> {
    let b = match parent_b {
        Some(g) => serde_json::to_string(g)?,
        None => "Not provided".to_string(),
    };
    Ok(format!(
        "## Query\n{}\n\n## Document Summary\n{}\n\n## Parent Genotype A (JSON)\n{}\n\n## Parent Genotype B (JSON) [Optional]\n{}\n\n## Operator Catalog\n{}\n\n## Task\nGenerate {n} candidates. Output exactly {n} JSON lines.",
        ctx.query.text,
        content_summary(&ctx.document.text),
        serde_json::to_string(parent_a)?,
        b,
        render_operator_catalog(),
    ))
}

/// Parses up to `n` JSON-line actions; blank lines and code fences are
/// skipped, surplus lines are counted as dropped.
pub fn parse_remote_actions(reply: &str, has_second_parent: bool, n: usize) -> RemoteProposal {
    let mut out = RemoteProposal::default();
    for line in reply.lines().map(str::trim) {
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if out.actions.len() == n {
            out.dropped += 1;
            continue;
        }
        let Ok(v) = serde_json::from_str::<Value>(line) else {
            out.dropped += 1;
            continue;
        };
        let Some(op) = v
            .get("operator_id")
            .and_then(Value::as_str)
            .and_then(OperatorId::from_name)
        else {
            out.dropped += 1;
            continue;
        };
        let genotype = v
            .get("child_genotype")
            .cloned()
            .and_then(|g| serde_json::from_value::<Genotype>(g).ok())
            .filter(|g| g.validate().is_ok());
        let Some(child_genotype) = genotype else {
            out.dropped += 1;
            continue;
        };
        if op.is_crossover() && !has_second_parent {
            out.rejected_crossover += 1;
            continue;
        }
        out.actions.push(RemoteAction {
            operator_id: op,
            child_genotype,
        });
    }
    out
}

/// Asks a remote model for `n` child genotypes of `parent_a`.
pub fn remote_propose(
    client: &ChatClient,
    ctx: &Context,
    parent_a: &Genotype,
    parent_b: Option<&Genotype>,
    n: usize,
) -> Result<RemoteProposal> {
    let user = evolver_user_message(ctx, parent_a, parent_b, n)?;
    let reply = client.chat(EVOLVER_SYSTEM_PROMPT, &user).map_err(Error::from)?;
    let proposal = parse_remote_actions(&reply, parent_b.is_some(), n);
    if proposal.dropped > 0 || proposal.rejected_crossover > 0 {
        log::warn!(
            "remote proposal: {} dropped, {} crossover actions rejected",
            proposal.dropped,
            proposal.rejected_crossover
        );
    }
    Ok(proposal)
}

/// Turns remote actions into proposals credited to the observable operator.
pub fn proposals_from_remote(
    ctx: &Context,
    parent_a: &Strategy,
    parent_b: Option<&Strategy>,
    proposal: &RemoteProposal,
    id_prefix: &str,
) -> Vec<Proposal> {
    let features = policy_features(ctx, &parent_a.genotype, parent_b.is_some());
    let mask = operator_mask(&parent_a.genotype, parent_b.is_some());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for a in &proposal.actions {
        let second = if a.operator_id.is_crossover() { parent_b } else { None };
        let id = format!("{id_prefix}-r{:02}", out.len());
        let child = Strategy::child(id, a.child_genotype.clone(), parent_a, second, a.operator_id);
        if !seen.insert(child.summary.clone()) {
            continue;
        }
        let mut mask = mask.clone();
        mask[a.operator_id.index()] = true;
        out.push(Proposal {
            strategy: child,
            operator: a.operator_id,
            origin: ProposalOrigin::Remote,
            parent_id: parent_a.id.clone(),
            features: features.clone(),
            mask,
        });
    }
    out
}
