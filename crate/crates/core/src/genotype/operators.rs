//! Operator catalog: twelve field-level mutations and two crossovers.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{self, STEPS, STRENGTHEN_CLAUSES};
use super::{ConstraintStrength, Genotype, ReasoningFlag, StrategyType, MAX_CLAUSES, MAX_STEPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorId {
    #[serde(rename = "mut_C_strengthen")]
    CStrengthen,
    #[serde(rename = "mut_C_relax")]
    CRelax,
    #[serde(rename = "mut_T_toggle_tone")]
    TToggleTone,
    #[serde(rename = "mut_T_technicality")]
    TTechnicality,
    #[serde(rename = "mut_F_schema_swap")]
    FSchemaSwap,
    #[serde(rename = "mut_F_toggle_code_block")]
    FToggleCodeBlock,
    #[serde(rename = "mut_F_toggle_prelude")]
    FTogglePrelude,
    #[serde(rename = "mut_R_add_step")]
    RAddStep,
    #[serde(rename = "mut_R_remove_step")]
    RRemoveStep,
    #[serde(rename = "mut_R_toggle_self_check")]
    RToggleSelfCheck,
    #[serde(rename = "mut_I_refocus")]
    IRefocus,
    #[serde(rename = "mut_L_length_policy")]
    LLengthPolicy,
    #[serde(rename = "cx_swap_gene")]
    CxSwapGene,
    #[serde(rename = "cx_conflict_synthesis")]
    CxConflictSynthesis,
}

pub const CATALOG: [OperatorId; 14] = [
    OperatorId::CStrengthen,
    OperatorId::CRelax,
    OperatorId::TToggleTone,
    OperatorId::TTechnicality,
    OperatorId::FSchemaSwap,
    OperatorId::FToggleCodeBlock,
    OperatorId::FTogglePrelude,
    OperatorId::RAddStep,
    OperatorId::RRemoveStep,
    OperatorId::RToggleSelfCheck,
    OperatorId::IRefocus,
    OperatorId::LLengthPolicy,
    OperatorId::CxSwapGene,
    OperatorId::CxConflictSynthesis,
];

impl OperatorId {
    pub fn name(self) -> &'static str {
        match self {
            OperatorId::CStrengthen => "mut_C_strengthen",
            OperatorId::CRelax => "mut_C_relax",
            OperatorId::TToggleTone => "mut_T_toggle_tone",
            OperatorId::TTechnicality => "mut_T_technicality",
            OperatorId::FSchemaSwap => "mut_F_schema_swap",
            OperatorId::FToggleCodeBlock => "mut_F_toggle_code_block",
            OperatorId::FTogglePrelude => "mut_F_toggle_prelude",
            OperatorId::RAddStep => "mut_R_add_step",
            OperatorId::RRemoveStep => "mut_R_remove_step",
            OperatorId::RToggleSelfCheck => "mut_R_toggle_self_check",
            OperatorId::IRefocus => "mut_I_refocus",
            OperatorId::LLengthPolicy => "mut_L_length_policy",
            OperatorId::CxSwapGene => "cx_swap_gene",
            OperatorId::CxConflictSynthesis => "cx_conflict_synthesis",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CATALOG.iter().copied().find(|op| op.name() == name)
    }

    pub fn index(self) -> usize {
        CATALOG.iter().position(|o| *o == self).unwrap()
    }

    pub fn arity(self) -> usize {
        if self.is_crossover() {
            2
        } else {
            1
        }
    }

    pub fn is_crossover(self) -> bool {
        matches!(self, OperatorId::CxSwapGene | OperatorId::CxConflictSynthesis)
    }

    pub fn description(self) -> &'static str {
        match self {
            OperatorId::CStrengthen => "add a constraint clause and raise constraint strictness",
            OperatorId::CRelax => "drop a constraint clause and lower constraint strictness",
            OperatorId::TToggleTone => "switch to the next tone (neutral, assertive, simple, technical, formal)",
            OperatorId::TTechnicality => "cycle the technicality level (low, mid, high)",
            OperatorId::FSchemaSwap => "change the output schema (prose, bullets, sections, qa)",
            OperatorId::FToggleCodeBlock => "toggle wrapping the output in a code block",
            OperatorId::FTogglePrelude => "toggle a prelude that restates the query",
            OperatorId::RAddStep => "add a reasoning step",
            OperatorId::RRemoveStep => "remove a reasoning step",
            OperatorId::RToggleSelfCheck => "toggle the self-check pass",
            OperatorId::IRefocus => "refocus the instruction on a different rewriting intent",
            OperatorId::LLengthPolicy => "cycle the length policy (keep, shorten, expand)",
            OperatorId::CxSwapGene => "child takes a random subset of gene blocks from parent A, the rest from parent B",
            OperatorId::CxConflictSynthesis => "merge both parents, keeping parent A on conflicts and uniting clauses and steps",
        }
    }

    /// Whether a mutation would change `g`. Crossovers are always applicable
    /// when a second parent exists.
    pub fn is_applicable(self, g: &Genotype) -> bool {
        match self {
            OperatorId::CStrengthen => {
                g.constraints.strength != ConstraintStrength::Strict
                    || (g.constraints.clauses.len() < MAX_CLAUSES
                        && unused_strengthen_clauses(g).next().is_some())
            }
            OperatorId::CRelax => {
                !g.constraints.clauses.is_empty()
                    || g.constraints.strength != ConstraintStrength::Soft
            }
            OperatorId::RAddStep => {
                g.reasoning.steps.len() < MAX_STEPS && unused_steps(g).next().is_some()
            }
            OperatorId::RRemoveStep => !g.reasoning.steps.is_empty(),
            _ => true,
        }
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn unused_strengthen_clauses(g: &Genotype) -> impl Iterator<Item = &'static str> + '_ {
    STRENGTHEN_CLAUSES
        .iter()
        .map(|c| c.text)
        .filter(move |t| !g.constraints.clauses.iter().any(|c| c == t))
}

fn unused_steps(g: &Genotype) -> impl Iterator<Item = &'static vocab::StepSpec> + '_ {
    STEPS
        .iter()
        .filter(move |s| !g.reasoning.steps.iter().any(|c| c == s.text))
}

fn raise(s: ConstraintStrength) -> ConstraintStrength {
    match s {
        ConstraintStrength::Soft => ConstraintStrength::Normal,
        _ => ConstraintStrength::Strict,
    }
}

fn lower(s: ConstraintStrength) -> ConstraintStrength {
    match s {
        ConstraintStrength::Strict => ConstraintStrength::Normal,
        _ => ConstraintStrength::Soft,
    }
}

fn set_flag(g: &mut Genotype, flag: ReasoningFlag) {
    match flag {
        ReasoningFlag::SelfCheck => g.reasoning.self_check = true,
        ReasoningFlag::ConflictResolution => g.reasoning.conflict_resolution = true,
        ReasoningFlag::PostCheck => g.reasoning.post_check = true,
    }
}

fn union_capped(a: &[String], b: &[String], cap: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in a.iter().chain(b) {
        if out.len() == cap {
            break;
        }
        if !out.contains(item) {
            out.push(item.clone());
        }
    }
    out
}

/// Applies `op` to parent `a` (and `b` for crossovers).
///
/// Crossovers without a second parent, mutations given one, and mutations
/// that are not applicable to `a` are contract violations.
pub fn apply_operator<R: Rng + ?Sized>(
    op: OperatorId,
    a: &Genotype,
    b: Option<&Genotype>,
    rng: &mut R,
) -> Result<Genotype> {
    if op.is_crossover() != b.is_some() {
        return Err(Error::Contract(format!(
            "{op} has arity {} but {} parent(s) were supplied",
            op.arity(),
            1 + b.is_some() as usize
        )));
    }
    if !op.is_applicable(a) {
        return Err(Error::Contract(format!("{op} is not applicable to this genotype")));
    }
    let mut g = a.clone();
    match op {
        OperatorId::CStrengthen => {
            if g.constraints.clauses.len() < MAX_CLAUSES {
                let unused: Vec<&str> = unused_strengthen_clauses(a).collect();
                if let Some(c) = unused.choose(rng) {
                    g.constraints.clauses.push(c.to_string());
                }
            }
            g.constraints.strength = raise(g.constraints.strength);
        }
        OperatorId::CRelax => {
            if !g.constraints.clauses.is_empty() {
                let i = rng.gen_range(0..g.constraints.clauses.len());
                g.constraints.clauses.remove(i);
            }
            g.constraints.strength = lower(g.constraints.strength);
        }
        OperatorId::TToggleTone => g.tone.tone = g.tone.tone.cycle(),
        OperatorId::TTechnicality => g.tone.technicality = g.tone.technicality.cycle(),
        OperatorId::FSchemaSwap => g.format.output_schema = g.format.output_schema.cycle(),
        OperatorId::FToggleCodeBlock => g.format.use_code_block = !g.format.use_code_block,
        OperatorId::FTogglePrelude => g.format.has_prelude = !g.format.has_prelude,
        OperatorId::RAddStep => {
            let unused: Vec<_> = unused_steps(a).collect();
            let step = unused.choose(rng).expect("applicability checked");
            g.reasoning.steps.push(step.text.to_string());
            if let Some(flag) = step.flag {
                set_flag(&mut g, flag);
            }
        }
        OperatorId::RRemoveStep => {
            let i = rng.gen_range(0..g.reasoning.steps.len());
            g.reasoning.steps.remove(i);
        }
        OperatorId::RToggleSelfCheck => g.reasoning.self_check = !g.reasoning.self_check,
        OperatorId::IRefocus => {
            let choices: Vec<StrategyType> = StrategyType::ALL
                .iter()
                .copied()
                .filter(|t| *t != StrategyType::General && *t != a.instruction.intent)
                .collect();
            let intent = *choices.choose(rng).expect("nine seed intents");
            g.instruction.intent = intent;
            g.instruction.text = vocab::intent_template(intent).to_string();
        }
        OperatorId::LLengthPolicy => {
            g.constraints.length_policy = g.constraints.length_policy.cycle()
        }
        OperatorId::CxSwapGene => {
            let b = b.expect("arity checked");
            if rng.gen_bool(0.5) {
                g.instruction = b.instruction.clone();
            }
            if rng.gen_bool(0.5) {
                g.constraints = b.constraints.clone();
            }
            if rng.gen_bool(0.5) {
                g.reasoning = b.reasoning.clone();
            }
            if rng.gen_bool(0.5) {
                g.format = b.format.clone();
            }
            if rng.gen_bool(0.5) {
                g.tone = b.tone.clone();
            }
        }
        OperatorId::CxConflictSynthesis => {
            let b = b.expect("arity checked");
            g.constraints.clauses =
                union_capped(&a.constraints.clauses, &b.constraints.clauses, MAX_CLAUSES);
            g.reasoning.steps = union_capped(&a.reasoning.steps, &b.reasoning.steps, MAX_STEPS);
        }
    }
    debug_assert!(g.validate().is_ok(), "{op} produced an invalid genotype");
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{descriptor, render_prompt, seed_genotypes, Tone};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn catalog_names_and_arity() {
        assert_eq!(CATALOG.len(), 14);
        for op in CATALOG {
            assert_eq!(OperatorId::from_name(op.name()), Some(op));
            if op.is_crossover() {
                assert!(op.name().starts_with("cx_"));
                assert_eq!(op.arity(), 2);
            } else {
                assert!(op.name().starts_with("mut_"));
                assert_eq!(op.arity(), 1);
            }
            let json = serde_json::to_string(&op).unwrap();
            assert_eq!(json, format!("\"{}\"", op.name()));
        }
        assert_eq!(CATALOG.iter().filter(|o| o.is_crossover()).count(), 2);
    }

    #[test]
    fn toggle_tone_cycles() {
        let g = Genotype::default();
        let c = apply_operator(OperatorId::TToggleTone, &g, None, &mut rng()).unwrap();
        assert_eq!(c.tone.tone, Tone::Assertive);
    }

    #[test]
    fn strengthen_on_empty() {
        let g = Genotype::default();
        let c = apply_operator(OperatorId::CStrengthen, &g, None, &mut rng()).unwrap();
        assert_eq!(c.constraints.clauses.len(), 1);
        assert_eq!(c.constraints.strength, ConstraintStrength::Normal);
    }

    #[test]
    fn swap_gene_identical_parents() {
        let g = seed_genotypes()[3].genotype.clone();
        for seed in 0..20 {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let c = apply_operator(OperatorId::CxSwapGene, &g, Some(&g), &mut r).unwrap();
            assert_eq!(c, g);
        }
    }

    #[test]
    fn crossover_needs_second_parent() {
        let g = Genotype::default();
        assert!(matches!(
            apply_operator(OperatorId::CxSwapGene, &g, None, &mut rng()),
            Err(Error::Contract(_))
        ));
        assert!(apply_operator(OperatorId::TToggleTone, &g, Some(&g), &mut rng()).is_err());
    }

    #[test]
    fn conflict_synthesis_unions_and_prefers_a() {
        let seeds = seed_genotypes();
        let a = &seeds[0].genotype;
        let b = &seeds[3].genotype;
        let c = apply_operator(OperatorId::CxConflictSynthesis, a, Some(b), &mut rng()).unwrap();
        assert_eq!(c.tone, a.tone);
        assert_eq!(c.instruction, a.instruction);
        assert!(c.constraints.clauses.len() <= MAX_CLAUSES);
        for cl in &a.constraints.clauses {
            assert!(c.constraints.clauses.contains(cl));
        }
        assert!(c.validate().is_ok());
    }

    /// Every applicable mutation on every seed changes the descriptor or prompt.
    #[test]
    fn mutations_are_never_silent_on_seeds() {
        for s in seed_genotypes() {
            for op in CATALOG.iter().filter(|o| !o.is_crossover()) {
                if !op.is_applicable(&s.genotype) {
                    assert_eq!(*op, OperatorId::RRemoveStep, "{op} inapplicable on {}", s.id);
                    continue;
                }
                for seed in 0..5 {
                    let mut r = ChaCha8Rng::seed_from_u64(seed);
                    let c = apply_operator(*op, &s.genotype, None, &mut r).unwrap();
                    assert!(
                        descriptor(&c) != descriptor(&s.genotype)
                            || render_prompt(&c) != render_prompt(&s.genotype),
                        "{op} was a no-op on {}",
                        s.id
                    );
                }
            }
        }
    }
}
