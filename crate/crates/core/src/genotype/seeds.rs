//! The nine hand-written seed strategies that initialize the archive.

use super::vocab::SEED_CLAUSES;
use super::{ConstraintStrength, Genotype, Strategy, StrategyType, Technicality, Tone};

struct SeedDef {
    id: &'static str,
    intent: StrategyType,
    clauses: [usize; 3],
    tone: Tone,
    technicality: Technicality,
}

const SEEDS: [SeedDef; 9] = [
    SeedDef {
        id: "seed-keyword-stuffing",
        intent: StrategyType::KeywordStuffing,
        clauses: [0, 1, 2],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-unique-words",
        intent: StrategyType::UniqueWords,
        clauses: [3, 4, 5],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-easy-to-understand",
        intent: StrategyType::EasyToUnderstand,
        clauses: [6, 7, 8],
        tone: Tone::Simple,
        technicality: Technicality::Low,
    },
    SeedDef {
        id: "seed-authoritative",
        intent: StrategyType::Authoritative,
        clauses: [9, 10, 11],
        tone: Tone::Assertive,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-technical-words",
        intent: StrategyType::TechnicalWords,
        clauses: [12, 13, 14],
        tone: Tone::Technical,
        technicality: Technicality::High,
    },
    SeedDef {
        id: "seed-fluency-optimization",
        intent: StrategyType::FluencyOptimization,
        clauses: [15, 16, 17],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-cite-sources",
        intent: StrategyType::CiteSources,
        clauses: [18, 19, 20],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-quotation-addition",
        intent: StrategyType::QuotationAddition,
        clauses: [21, 22, 23],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
    SeedDef {
        id: "seed-statistics-addition",
        intent: StrategyType::StatisticsAddition,
        clauses: [24, 25, 26],
        tone: Tone::Neutral,
        technicality: Technicality::Mid,
    },
];

/// Keyword Stuffing, Unique Words, Easy-To-Understand, Authoritative,
/// Technical Words, Fluency Optimization, Cite Sources, Quotation Addition,
/// Statistics Addition, in that order.
pub fn seed_genotypes() -> Vec<Strategy> {
    SEEDS
        .iter()
        .map(|def| {
            let mut g = Genotype::with_intent(def.intent);
            g.constraints.clauses = def
                .clauses
                .iter()
                .map(|&i| SEED_CLAUSES[i].text.to_string())
                .collect();
            g.constraints.strength = ConstraintStrength::Normal;
            g.tone.tone = def.tone;
            g.tone.technicality = def.technicality;
            Strategy::new(def.id, g)
        })
        .collect()
}
