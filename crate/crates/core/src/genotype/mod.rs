//! Structured rewriting strategies.
//!
//! A [`Genotype`] has five gene blocks (instruction, constraints, reasoning,
//! format, tone). Everything except the instruction text is drawn from
//! closed vocabularies, so genotypes can be compared, bucketed into archive
//! cells and rendered two ways: a compact `Name:Value` summary for the
//! critic and a full prompt for the rewriter.

mod operators;
mod seeds;
pub mod vocab;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use operators::{apply_operator, OperatorId, CATALOG};
pub use seeds::seed_genotypes;
pub use vocab::Lever;

pub const MAX_STEPS: usize = 8;
pub const MAX_CLAUSES: usize = 8;

macro_rules! label_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $display:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).unwrap()
            }

            pub fn display_name(self) -> &'static str {
                match self { $($name::$variant => $display),+ }
            }

            /// Next label in declaration order, wrapping around.
            pub fn cycle(self) -> Self {
                Self::ALL[(self.index() + 1) % Self::ALL.len()]
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.display_name())
            }
        }
    };
}

label_enum!(
    /// Intent tag assigned when a strategy's instruction is created.
    StrategyType {
        General => "General",
        KeywordStuffing => "KeywordStuffing",
        UniqueWords => "UniqueWords",
        EasyToUnderstand => "EasyToUnderstand",
        Authoritative => "Authoritative",
        TechnicalWords => "TechnicalWords",
        FluencyOptimization => "FluencyOptimization",
        CiteSources => "CiteSources",
        QuotationAddition => "QuotationAddition",
        StatisticsAddition => "StatisticsAddition",
    }
);

label_enum!(ConstraintStrength {
    Soft => "Soft",
    Normal => "Normal",
    Strict => "Strict",
});

label_enum!(OutputSchema {
    Prose => "Prose",
    Bullets => "Bullets",
    Sections => "Sections",
    Qa => "QA",
});

label_enum!(Tone {
    Neutral => "Neutral",
    Assertive => "Assertive",
    Simple => "Simple",
    Technical => "Technical",
    Formal => "Formal",
});

label_enum!(Technicality {
    Low => "Low",
    Mid => "Mid",
    High => "High",
});

label_enum!(LengthPolicy {
    Keep => "Keep",
    Shorten => "Shorten",
    Expand => "Expand",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReasoningFlag {
    SelfCheck,
    ConflictResolution,
    PostCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstructionGene {
    pub intent: StrategyType,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintGene {
    pub clauses: Vec<String>,
    pub strength: ConstraintStrength,
    pub length_policy: LengthPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReasoningGene {
    pub steps: Vec<String>,
    pub self_check: bool,
    pub conflict_resolution: bool,
    pub post_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormatGene {
    pub output_schema: OutputSchema,
    pub use_code_block: bool,
    pub has_prelude: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToneGene {
    pub tone: Tone,
    pub technicality: Technicality,
}

/// The five gene blocks, serialized under these exact names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genotype {
    pub instruction: InstructionGene,
    pub constraints: ConstraintGene,
    pub reasoning: ReasoningGene,
    pub format: FormatGene,
    pub tone: ToneGene,
}

impl Default for Genotype {
    fn default() -> Self {
        Genotype::with_intent(StrategyType::General)
    }
}

impl Genotype {
    /// All-default genotype carrying the template instruction for `intent`.
    pub fn with_intent(intent: StrategyType) -> Self {
        Genotype {
            instruction: InstructionGene {
                intent,
                text: vocab::intent_template(intent).to_string(),
            },
            constraints: ConstraintGene {
                clauses: Vec::new(),
                strength: ConstraintStrength::Soft,
                length_policy: LengthPolicy::Keep,
            },
            reasoning: ReasoningGene {
                steps: Vec::new(),
                self_check: false,
                conflict_resolution: false,
                post_check: false,
            },
            format: FormatGene {
                output_schema: OutputSchema::Prose,
                use_code_block: false,
                has_prelude: false,
            },
            tone: ToneGene {
                tone: Tone::Neutral,
                technicality: Technicality::Mid,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.instruction.text.trim().is_empty() {
            return Err(Error::Validation("instruction text is empty".into()));
        }
        if self.reasoning.steps.len() > MAX_STEPS {
            return Err(Error::Validation(format!(
                "{} reasoning steps exceed the limit of {MAX_STEPS}",
                self.reasoning.steps.len()
            )));
        }
        if self.constraints.clauses.len() > MAX_CLAUSES {
            return Err(Error::Validation(format!(
                "{} constraint clauses exceed the limit of {MAX_CLAUSES}",
                self.constraints.clauses.len()
            )));
        }
        for c in &self.constraints.clauses {
            if vocab::clause_spec(c).is_none() {
                return Err(Error::Validation(format!("unknown constraint clause: {c:?}")));
            }
        }
        for s in &self.reasoning.steps {
            if vocab::step_spec(s).is_none() {
                return Err(Error::Validation(format!("unknown reasoning step: {s:?}")));
            }
        }
        if has_duplicates(&self.constraints.clauses) || has_duplicates(&self.reasoning.steps) {
            return Err(Error::Validation("duplicate clause or step".into()));
        }
        Ok(())
    }

    pub fn clause_tags(&self) -> Vec<&'static str> {
        dedup_tags(
            self.constraints
                .clauses
                .iter()
                .filter_map(|c| vocab::clause_spec(c).map(|s| s.tag)),
        )
    }

    pub fn step_tags(&self) -> Vec<&'static str> {
        dedup_tags(
            self.reasoning
                .steps
                .iter()
                .filter_map(|s| vocab::step_spec(s).map(|s| s.tag)),
        )
    }

    /// Levers requested by the intent, clauses and steps.
    pub fn levers(&self) -> Vec<Lever> {
        let mut out: Vec<Lever> = vocab::intent_lever(self.instruction.intent)
            .into_iter()
            .chain(
                self.constraints
                    .clauses
                    .iter()
                    .filter_map(|c| vocab::clause_spec(c).and_then(|s| s.lever)),
            )
            .chain(
                self.reasoning
                    .steps
                    .iter()
                    .filter_map(|s| vocab::step_spec(s).and_then(|s| s.lever)),
            )
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Categorical (name, value) pairs that differ from their default, in
    /// rendering order.
    fn active_fields(&self) -> Vec<(&'static str, String)> {
        let mut f = Vec::new();
        let g = self;
        if g.instruction.intent != StrategyType::General {
            f.push(("Type", g.instruction.intent.to_string()));
        }
        if g.tone.tone != Tone::Neutral {
            f.push(("Tone", g.tone.tone.to_string()));
        }
        if g.tone.technicality != Technicality::Mid {
            f.push(("Tech", g.tone.technicality.to_string()));
        }
        if g.format.output_schema != OutputSchema::Prose {
            f.push(("Format", g.format.output_schema.to_string()));
        }
        if g.format.use_code_block {
            f.push(("CodeBlock", "On".into()));
        }
        if g.format.has_prelude {
            f.push(("Prelude", "On".into()));
        }
        if g.constraints.strength != ConstraintStrength::Soft {
            f.push(("Constraint", g.constraints.strength.to_string()));
        }
        if !g.constraints.clauses.is_empty() {
            f.push(("Clauses", g.clause_tags().join("+")));
        }
        if g.constraints.length_policy != LengthPolicy::Keep {
            f.push(("Length", g.constraints.length_policy.to_string()));
        }
        if !g.reasoning.steps.is_empty() {
            f.push(("Steps", g.step_tags().join("+")));
        }
        if g.reasoning.self_check {
            f.push(("SelfCheck", "On".into()));
        }
        if g.reasoning.conflict_resolution {
            f.push(("ConflictRes", "On".into()));
        }
        if g.reasoning.post_check {
            f.push(("PostCheck", "On".into()));
        }
        f
    }

    /// Fraction of the categorical fields that are away from their default.
    pub fn active_field_fraction(&self) -> f64 {
        self.active_fields().len() as f64 / SUMMARY_FIELDS as f64
    }
}

/// Number of categorical fields the summary can mention.
pub const SUMMARY_FIELDS: usize = 13;

fn has_duplicates(items: &[String]) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, a)| items[..i].iter().any(|b| a == b))
}

fn dedup_tags(tags: impl Iterator<Item = &'static str>) -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for t in tags {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Compact critic-side rendering: `Name:Value` pairs joined by `|`.
pub fn render_summary(g: &Genotype) -> String {
    let fields = g.active_fields();
    if fields.is_empty() {
        return "Default".to_string();
    }
    fields
        .iter()
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join("|")
}

const SYSTEM_TEMPLATE: &str = "You are an expert content editor. Rewrite the source document \
so that a generative search engine answering the query is more likely to use and cite it.";

/// Full rewriter-side rendering: fixed section templates around each gene.
pub fn render_prompt(g: &Genotype) -> String {
    let mut out = String::new();
    out.push_str(SYSTEM_TEMPLATE);
    out.push_str("\n\n");
    out.push_str(&format!("Strategy focus: {}\n", g.instruction.intent));
    out.push_str(&format!("Task: {}\n", g.instruction.text.trim()));

    let c = &g.constraints;
    if !c.clauses.is_empty() {
        out.push_str(&format!(
            "\nConstraints (enforcement: {}). Adhere to the following constraints:\n",
            c.strength.display_name().to_lowercase()
        ));
        for clause in &c.clauses {
            out.push_str(&format!("- {clause}\n"));
        }
    } else if c.strength != ConstraintStrength::Soft {
        out.push_str(&format!(
            "\nConstraint enforcement: {}.\n",
            c.strength.display_name().to_lowercase()
        ));
    }
    match c.length_policy {
        LengthPolicy::Keep => {}
        LengthPolicy::Shorten => out.push_str("Length: shorten the text to its essentials.\n"),
        LengthPolicy::Expand => {
            out.push_str("Length: expand the text with supporting detail.\n")
        }
    }

    let r = &g.reasoning;
    if !r.steps.is_empty() {
        out.push_str("\nWork through these steps before writing:\n");
        for (i, step) in r.steps.iter().enumerate() {
            out.push_str(&format!("{}. {step}\n", i + 1));
        }
    }
    if r.self_check {
        out.push_str("Self-check: compare your draft against the source before answering.\n");
    }
    if r.conflict_resolution {
        out.push_str(
            "Conflict resolution: when instructions conflict, prefer factual accuracy and say which rule won.\n",
        );
    }
    if r.post_check {
        out.push_str("Post-check: after writing, confirm the output is consistent with the source.\n");
    }

    let f = &g.format;
    out.push('\n');
    out.push_str(match f.output_schema {
        OutputSchema::Prose => "Format: write flowing prose.\n",
        OutputSchema::Bullets => "Format: present the content as bullet points.\n",
        OutputSchema::Sections => "Format: organize the content under short section headings.\n",
        OutputSchema::Qa => "Format: organize the content as question-and-answer pairs.\n",
    });
    if f.use_code_block {
        out.push_str("Wrap the whole output in a single code block.\n");
    }
    if f.has_prelude {
        out.push_str("Begin with a one-sentence prelude that restates the query.\n");
    }

    let t = &g.tone;
    out.push_str(match t.tone {
        Tone::Neutral => "Tone: neutral and journalistic.\n",
        Tone::Assertive => "Tone: assertive and confident.\n",
        Tone::Simple => "Tone: simple, plain language.\n",
        Tone::Technical => "Tone: technical and precise.\n",
        Tone::Formal => "Tone: formal.\n",
    });
    out.push_str(&format!(
        "Technicality: {}.\n",
        t.technicality.display_name().to_lowercase()
    ));
    out.push_str("\nOutput: The revised source text only.");
    out
}

/// Cardinality of each descriptor axis, in field order.
pub const DESCRIPTOR_CARDINALITIES: [usize; 12] = [10, 4, 2, 2, 2, 2, 2, 2, 5, 3, 3, 4];

/// Behavioral cell key: twelve small discrete axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Descriptor {
    pub strategy_type: u8,
    pub output_schema: u8,
    pub has_self_check: u8,
    pub has_reasoning: u8,
    pub has_conflict_res: u8,
    pub use_code_block: u8,
    pub has_prelude: u8,
    pub has_post_check: u8,
    pub tone_bucket: u8,
    pub constraint_strength: u8,
    pub length_policy: u8,
    pub reasoning_steps_bucket: u8,
}

impl Descriptor {
    pub fn values(&self) -> [u8; 12] {
        [
            self.strategy_type,
            self.output_schema,
            self.has_self_check,
            self.has_reasoning,
            self.has_conflict_res,
            self.use_code_block,
            self.has_prelude,
            self.has_post_check,
            self.tone_bucket,
            self.constraint_strength,
            self.length_policy,
            self.reasoning_steps_bucket,
        ]
    }

    /// Positions of the active one-hot slots (one per axis).
    pub fn one_hot_indices(&self) -> [usize; 12] {
        let mut out = [0; 12];
        let mut offset = 0;
        for (k, (v, card)) in self
            .values()
            .iter()
            .zip(DESCRIPTOR_CARDINALITIES)
            .enumerate()
        {
            out[k] = offset + *v as usize;
            offset += card;
        }
        out
    }

    pub fn one_hot_len() -> usize {
        DESCRIPTOR_CARDINALITIES.iter().sum()
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values().iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn reasoning_steps_bucket(steps: usize) -> u8 {
    match steps {
        0 => 0,
        1..=2 => 1,
        3..=5 => 2,
        _ => 3,
    }
}

pub fn descriptor(g: &Genotype) -> Descriptor {
    Descriptor {
        strategy_type: g.instruction.intent.index() as u8,
        output_schema: g.format.output_schema.index() as u8,
        has_self_check: g.reasoning.self_check as u8,
        has_reasoning: !g.reasoning.steps.is_empty() as u8,
        has_conflict_res: g.reasoning.conflict_resolution as u8,
        use_code_block: g.format.use_code_block as u8,
        has_prelude: g.format.has_prelude as u8,
        has_post_check: g.reasoning.post_check as u8,
        tone_bucket: g.tone.tone.index() as u8,
        constraint_strength: g.constraints.strength.index() as u8,
        length_policy: g.constraints.length_policy.index() as u8,
        reasoning_steps_bucket: reasoning_steps_bucket(g.reasoning.steps.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    Ge,
    Critic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub value: f64,
    pub source: RewardSource,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parents: Vec<String>,
    pub depth: u32,
    /// Operator names applied along the primary-parent line, oldest first.
    pub operators: Vec<String>,
}

/// An archived (or candidate) strategy: genotype plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub id: String,
    pub genotype: Genotype,
    pub summary: String,
    pub lineage: Lineage,
    pub reward: Option<Reward>,
}

impl Strategy {
    pub fn new(id: impl Into<String>, genotype: Genotype) -> Self {
        let summary = render_summary(&genotype);
        Strategy {
            id: id.into(),
            genotype,
            summary,
            lineage: Lineage::default(),
            reward: None,
        }
    }

    /// Child produced by `op` from `parent` (and optionally a second parent).
    pub fn child(
        id: impl Into<String>,
        genotype: Genotype,
        parent: &Strategy,
        second: Option<&Strategy>,
        op: OperatorId,
    ) -> Self {
        let mut s = Strategy::new(id, genotype);
        let mut parents = vec![parent.id.clone()];
        let mut depth = parent.lineage.depth;
        if let Some(b) = second {
            parents.push(b.id.clone());
            depth = depth.max(b.lineage.depth);
        }
        let mut operators = parent.lineage.operators.clone();
        operators.push(op.name().to_string());
        s.lineage = Lineage {
            parents,
            depth: depth + 1,
            operators,
        };
        s
    }

    pub fn descriptor(&self) -> Descriptor {
        descriptor(&self.genotype)
    }

    pub fn prompt(&self) -> String {
        render_prompt(&self.genotype)
    }

    pub fn reward_value(&self) -> Option<f64> {
        self.reward.map(|r| r.value)
    }

    pub fn with_reward(mut self, value: f64, source: RewardSource) -> Self {
        self.reward = Some(Reward { value, source });
        self
    }

    /// Checks the cached summary still matches the genotype.
    pub fn validate(&self) -> Result<()> {
        self.genotype.validate()?;
        if self.summary != render_summary(&self.genotype) {
            return Err(Error::Validation(format!(
                "strategy `{}` summary is stale",
                self.id
            )));
        }
        if self.lineage.parents.iter().any(|p| p == &self.id) {
            return Err(Error::Validation(format!("strategy `{}` is its own parent", self.id)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_example() {
        let mut g = Genotype::default();
        g.tone.tone = Tone::Assertive;
        g.format.output_schema = OutputSchema::Bullets;
        g.constraints.strength = ConstraintStrength::Strict;
        assert_eq!(render_summary(&g), "Tone:Assertive|Format:Bullets|Constraint:Strict");
    }

    #[test]
    fn default_summary() {
        assert_eq!(render_summary(&Genotype::default()), "Default");
    }

    #[test]
    fn summary_ignores_instruction_text() {
        let a = Genotype::default();
        let mut b = a.clone();
        b.instruction.text = "Something entirely different.".into();
        assert_eq!(render_summary(&a), render_summary(&b));
        assert_ne!(render_prompt(&a), render_prompt(&b));
    }

    #[test]
    fn no_constraints_section_when_empty() {
        let g = Genotype::default();
        let p = render_prompt(&g);
        assert!(!p.contains("Adhere to the following constraints"));
        assert!(!p.contains("Constraint enforcement"));
    }

    #[test]
    fn steps_bucket_boundaries() {
        let mut g = Genotype::default();
        g.reasoning.steps = vocab::STEPS[..2].iter().map(|s| s.text.to_string()).collect();
        assert_eq!(descriptor(&g).reasoning_steps_bucket, 1);
        g.reasoning.steps.push(vocab::STEPS[2].text.to_string());
        assert_eq!(descriptor(&g).reasoning_steps_bucket, 2);
        assert_eq!(reasoning_steps_bucket(0), 0);
        assert_eq!(reasoning_steps_bucket(5), 2);
        assert_eq!(reasoning_steps_bucket(6), 3);
        assert_eq!(reasoning_steps_bucket(8), 3);
    }

    #[test]
    fn descriptor_within_cardinalities() {
        let d = descriptor(&Genotype::default());
        for (v, card) in d.values().iter().zip(DESCRIPTOR_CARDINALITIES) {
            assert!((*v as usize) < card);
        }
        let idx = d.one_hot_indices();
        assert!(idx.iter().all(|&i| i < Descriptor::one_hot_len()));
    }

    #[test]
    fn equal_categoricals_equal_descriptors() {
        let a = Genotype::default();
        let mut b = a.clone();
        b.instruction.text = "Other words entirely.".into();
        assert_eq!(descriptor(&a), descriptor(&b));
    }

    #[test]
    fn genotype_json_uses_gene_block_names() {
        let v = serde_json::to_value(Genotype::default()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["instruction", "constraints", "reasoning", "format", "tone"] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert_eq!(keys.len(), 5);
    }

    #[test]
    fn validation_rejects_unknown_clause() {
        let mut g = Genotype::default();
        g.constraints.clauses.push("Invent anything you like.".into());
        assert!(g.validate().is_err());
        let mut g = Genotype::default();
        g.instruction.text = "  ".into();
        assert!(g.validate().is_err());
    }

    /// Exhaustive over a small grid of closed-vocabulary fields.
    #[test]
    fn prompt_is_injective_on_grid() {
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        let mut count = 0;
        for &tone in Tone::ALL {
            for &tech in Technicality::ALL {
                for &schema in OutputSchema::ALL {
                    for &strength in ConstraintStrength::ALL {
                        for &length in LengthPolicy::ALL {
                            for flags in 0..8u8 {
                                for clauses in 0..3usize {
                                    let mut g = Genotype::default();
                                    g.tone.tone = tone;
                                    g.tone.technicality = tech;
                                    g.format.output_schema = schema;
                                    g.format.use_code_block = flags & 1 != 0;
                                    g.format.has_prelude = flags & 2 != 0;
                                    g.reasoning.self_check = flags & 4 != 0;
                                    g.constraints.strength = strength;
                                    g.constraints.length_policy = length;
                                    g.constraints.clauses = vocab::STRENGTHEN_CLAUSES[..clauses]
                                        .iter()
                                        .map(|c| c.text.to_string())
                                        .collect();
                                    assert!(seen.insert(render_prompt(&g)), "collision for {g:?}");
                                    count += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), count);
    }
}
