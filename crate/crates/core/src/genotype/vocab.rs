//! Closed libraries of constraint clauses, reasoning steps and intent templates.

use super::{ReasoningFlag, StrategyType};

/// Content lever a clause or step asks the rewriter to pull.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lever {
    Statistic,
    Quote,
    Source,
    Keyword,
}

#[derive(Debug, Clone, Copy)]
pub struct ClauseSpec {
    pub text: &'static str,
    pub tag: &'static str,
    pub lever: Option<Lever>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepSpec {
    pub text: &'static str,
    pub tag: &'static str,
    pub lever: Option<Lever>,
    pub flag: Option<ReasoningFlag>,
}

const fn clause(text: &'static str, tag: &'static str, lever: Option<Lever>) -> ClauseSpec {
    ClauseSpec { text, tag, lever }
}

/// Clauses `mut_C_strengthen` draws from.
pub const STRENGTHEN_CLAUSES: &[ClauseSpec] = &[
    clause(
        "Support key claims with at least one concrete, verifiable figure.",
        "Concrete-Figures",
        Some(Lever::Statistic),
    ),
    clause(
        "Attribute key claims to a named, credible source.",
        "Source-Attribution",
        Some(Lever::Source),
    ),
    clause(
        "Include a short quotation from a recognized expert or organization.",
        "Expert-Quote",
        Some(Lever::Quote),
    ),
    clause("Mention the query's key terms explicitly.", "Query-Terms", Some(Lever::Keyword)),
    clause("Never fabricate facts, numbers, quotes, or sources.", "Anti-Hallucination", None),
    clause("Keep every statement consistent with the original facts.", "Fact-Consistency", None),
    clause("Stay within the original word budget.", "Word-Budget", None),
    clause("Check that every citation points to a real source.", "Citation-Check", None),
];

/// Constraint clauses carried by the nine seed strategies.
pub const SEED_CLAUSES: &[ClauseSpec] = &[
    clause("Do not change, add, or remove any core information.", "Core-Info", None),
    clause(
        "Keep the original structure (paragraphing, bullet points, line breaks).",
        "Keep-Structure",
        None,
    ),
    clause(
        "Insert keywords naturally inline (no keyword list at the end).",
        "Inline-Keywords",
        None,
    ),
    clause("Preserve the original meaning and all core information.", "Core-Info", None),
    clause("Do not add new claims or remove any content.", "No-New-Claims", None),
    clause("Keep the length and structure roughly the same.", "Keep-Structure", None),
    clause("Do not omit, add, or alter any core information.", "Core-Info", None),
    clause("Keep the original structure and roughly the same length.", "Keep-Structure", None),
    clause("Only rephrase sentences for clarity and readability.", "Rephrase-Only", None),
    clause("Do not add new facts or remove any information.", "No-New-Claims", None),
    clause(
        "Keep the original structure (formatting, bullets, spacing).",
        "Keep-Structure",
        None,
    ),
    clause(
        "Strengthen tone via wording choices, not by exaggerating or making unverifiable claims.",
        "No-Exaggeration",
        None,
    ),
    clause("Preserve all core information; do not introduce new claims.", "Core-Info", None),
    clause("Keep the structure and length roughly unchanged.", "Keep-Structure", None),
    clause("Rephrase sentences to sound more technical and precise.", "Rephrase-Only", None),
    clause("Do not alter the core content.", "Core-Info", None),
    clause("Improve sentence transitions and readability.", "Readability", None),
    clause("Keep the structure and length roughly the same.", "Keep-Structure", None),
    clause(
        "Citations must be plausible and verifiable; do not fabricate sources.",
        "Anti-Hallucination",
        None,
    ),
    clause(
        "Do not change the core information or add new claims.",
        "No-New-Claims",
        None,
    ),
    clause(
        "Keep structure and length roughly the same (about 5-6 citations total).",
        "Keep-Structure",
        None,
    ),
    clause(
        "Quotes must be accurate and attributable; do not invent quotes.",
        "Anti-Hallucination",
        None,
    ),
    clause(
        "Do not change core content; keep structure and length similar.",
        "Keep-Structure",
        None,
    ),
    clause(
        "Integrate quotes inline without adding long new paragraphs.",
        "Inline-Quotes",
        None,
    ),
    clause(
        "Statistics must be verifiable; do not invent numbers.",
        "Anti-Hallucination",
        None,
    ),
    clause(
        "Do not modify core content beyond inserting stats inline.",
        "Core-Info",
        None,
    ),
    clause(
        "Keep the original structure and stop at the end of the original source.",
        "Keep-Structure",
        None,
    ),
];

pub const STEPS: &[StepSpec] = &[
    StepSpec {
        text: "Identify the key terms of the query.",
        tag: "Key-Terms",
        lever: Some(Lever::Keyword),
        flag: None,
    },
    StepSpec {
        text: "Locate claims that would benefit from numerical evidence.",
        tag: "Evidence-Scan",
        lever: Some(Lever::Statistic),
        flag: None,
    },
    StepSpec {
        text: "Find statements worth attributing to a credible source.",
        tag: "Attribution-Scan",
        lever: Some(Lever::Source),
        flag: None,
    },
    StepSpec {
        text: "Plan where a short quotation adds authority.",
        tag: "Quote-Plan",
        lever: Some(Lever::Quote),
        flag: None,
    },
    StepSpec {
        text: "Verify each statement against the original source.",
        tag: "Self-Verify",
        lever: None,
        flag: Some(ReasoningFlag::SelfCheck),
    },
    StepSpec {
        text: "Resolve contradictions between instructions before writing.",
        tag: "Conflict-Resolve",
        lever: None,
        flag: Some(ReasoningFlag::ConflictResolution),
    },
    StepSpec {
        text: "Re-read the output for consistency with the source.",
        tag: "Post-Check",
        lever: None,
        flag: Some(ReasoningFlag::PostCheck),
    },
    StepSpec {
        text: "Outline the rewrite before writing it.",
        tag: "Outline",
        lever: None,
        flag: None,
    },
];

pub fn clause_spec(text: &str) -> Option<&'static ClauseSpec> {
    STRENGTHEN_CLAUSES
        .iter()
        .chain(SEED_CLAUSES.iter())
        .find(|c| c.text == text)
}

pub fn step_spec(text: &str) -> Option<&'static StepSpec> {
    STEPS.iter().find(|s| s.text == text)
}

/// Task sentence for each intent; the seed intents use the seed task text.
pub fn intent_template(intent: StrategyType) -> &'static str {
    match intent {
        StrategyType::General => {
            "Rewrite the source so that it is more useful and more likely to be cited."
        }
        StrategyType::KeywordStuffing => {
            "Improve the source by inserting up to 10 NEW, relevant SEO keywords that are NOT already present in the text."
        }
        StrategyType::UniqueWords => {
            "Revise the source by using more unique and precise vocabulary."
        }
        StrategyType::EasyToUnderstand => {
            "Rewrite the source in simple, easy-to-understand language."
        }
        StrategyType::Authoritative => {
            "Make the source sound confident, authoritative, and expert."
        }
        StrategyType::TechnicalWords => {
            "Rewrite the source in a more technical style using domain-appropriate terminology."
        }
        StrategyType::FluencyOptimization => {
            "Rewrite the source to improve fluency and coherence."
        }
        StrategyType::CiteSources => {
            "Strengthen credibility by adding a small number of natural-language citations to credible sources (e.g., industry reports, standards, official docs)."
        }
        StrategyType::QuotationAddition => {
            "Increase perceived authority by adding a few short, relevant quotations from reputable entities (e.g., well-known organizations or experts)."
        }
        StrategyType::StatisticsAddition => {
            "Add a few concise, relevant statistics or numerical facts to improve concreteness."
        }
    }
}

/// The lever an intent pulls by itself, if any.
pub fn intent_lever(intent: StrategyType) -> Option<Lever> {
    match intent {
        StrategyType::KeywordStuffing => Some(Lever::Keyword),
        StrategyType::CiteSources => Some(Lever::Source),
        StrategyType::QuotationAddition => Some(Lever::Quote),
        StrategyType::StatisticsAddition => Some(Lever::Statistic),
        _ => None,
    }
}
