//! Deterministic engine used for tests, oracles and desk-scale experiments.
//!
//! Salience of a document for a query is a weighted sum of four features:
//! the fraction of query terms the document contains, the number of tokens
//! carrying a digit, the number of quotation-mark pairs, and the number of
//! "according to" attributions. Rewrites move those features only through
//! the genotype's [`LeverProfile`]; every other field changes surface text
//! (register markers, layout symbols) without touching salience.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{BackendKind, Engine, EngineError};
use crate::answer::{CitedAnswer, Sentence};
use crate::genotype::{
    ConstraintStrength, Genotype, Lever, LengthPolicy, OutputSchema, Strategy, Technicality, Tone,
};
use crate::types::{CandidateSet, Document, Query};
use crate::util::{derived_rng, hash_str};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub seed: u64,
    pub sentences_per_answer: usize,
    pub keyword_overlap_w: f64,
    pub statistic_w: f64,
    pub quote_w: f64,
    pub citation_marker_w: f64,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            seed: 0,
            sentences_per_answer: 6,
            keyword_overlap_w: 3.0,
            statistic_w: 0.5,
            quote_w: 1.0,
            citation_marker_w: 1.0,
        }
    }
}

impl SimulationParams {
    pub fn with_seed(seed: u64) -> Self {
        SimulationParams {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.sentences_per_answer == 0 {
            return Err(EngineError::InvalidRequest(
                "sentences_per_answer must be at least 1".into(),
            ));
        }
        let w = [
            self.keyword_overlap_w,
            self.statistic_w,
            self.quote_w,
            self.citation_marker_w,
        ];
        if w.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::InvalidRequest("salience weights must be finite".into()));
        }
        Ok(())
    }
}

/// The six binary switches through which a genotype affects simulated salience.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeverProfile {
    pub statistic: bool,
    pub quote: bool,
    pub source: bool,
    pub keyword: bool,
    /// Doubles every injection.
    pub amplify: bool,
    /// Truncates the original text before injecting.
    pub shorten: bool,
}

impl LeverProfile {
    pub const COUNT: usize = 64;

    pub fn of(g: &Genotype) -> Self {
        let levers = g.levers();
        LeverProfile {
            statistic: levers.contains(&Lever::Statistic),
            quote: levers.contains(&Lever::Quote),
            source: levers.contains(&Lever::Source),
            keyword: levers.contains(&Lever::Keyword) || g.format.has_prelude,
            amplify: g.constraints.strength == ConstraintStrength::Strict
                || g.constraints.length_policy == LengthPolicy::Expand,
            shorten: g.constraints.length_policy == LengthPolicy::Shorten,
        }
    }

    pub fn bits(&self) -> u8 {
        [
            self.statistic,
            self.quote,
            self.source,
            self.keyword,
            self.amplify,
            self.shorten,
        ]
        .iter()
        .enumerate()
        .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i))
    }

    pub fn from_bits(bits: u8) -> Self {
        let on = |i: u8| bits & (1 << i) != 0;
        LeverProfile {
            statistic: on(0),
            quote: on(1),
            source: on(2),
            keyword: on(3),
            amplify: on(4),
            shorten: on(5),
        }
    }

    pub fn all() -> impl Iterator<Item = LeverProfile> {
        (0..Self::COUNT as u8).map(Self::from_bits)
    }

    /// A concrete genotype realizing this profile.
    pub fn representative(&self) -> Genotype {
        use crate::genotype::vocab::STRENGTHEN_CLAUSES;
        let mut g = Genotype::default();
        let wanted = [
            (self.statistic, Lever::Statistic),
            (self.quote, Lever::Quote),
            (self.source, Lever::Source),
            (self.keyword, Lever::Keyword),
        ];
        for (on, lever) in wanted {
            if on {
                let c = STRENGTHEN_CLAUSES
                    .iter()
                    .find(|c| c.lever == Some(lever))
                    .expect("every lever has a strengthen clause");
                g.constraints.clauses.push(c.text.to_string());
            }
        }
        if !g.constraints.clauses.is_empty() {
            g.constraints.strength = ConstraintStrength::Normal;
        }
        if self.amplify {
            g.constraints.strength = ConstraintStrength::Strict;
        }
        if self.shorten {
            g.constraints.length_policy = LengthPolicy::Shorten;
        }
        g
    }
}

/// Feature values behind a document's salience.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalienceFeatures {
    pub keyword_overlap: f64,
    pub digit_tokens: usize,
    pub quote_pairs: usize,
    pub source_markers: usize,
}

/// Words never treated as query terms; includes every word the simulated
/// rewriter injects so that injected boilerplate cannot move keyword overlap.
const STOPWORDS: &[&str] = &[
    "the", "and", "for", "are", "but", "not", "you", "all", "any", "can", "had", "her", "was",
    "one", "our", "out", "has", "him", "his", "how", "its", "may", "new", "now", "old", "see",
    "two", "who", "did", "does", "get", "got", "let", "put", "say", "she", "too", "use", "what",
    "when", "where", "which", "why", "with", "this", "that", "these", "those", "from", "into",
    "about", "than", "then", "them", "they", "their", "there", "been", "being", "have", "will",
    "would", "should", "could", "some", "more", "most", "much", "many", "very", "also", "just",
    "only", "over", "such", "each", "other", "your", "yours", "ours", "were", "here", "best",
    "key", "terms", "according", "recent", "industry", "report", "finding", "holds", "expert",
    "put", "matters", "people", "realize", "roughly", "cases", "follow", "pattern", "based",
    "observations", "notably", "simply", "technically", "formally", "short", "point",
    "explained", "detail", "below", "most", "comparable",
];

/// Lowercased alphanumeric query terms of length ≥ 3, minus stopwords.
pub fn query_terms(text: &str) -> BTreeSet<String> {
    tokens(text)
        .filter(|t| t.chars().count() >= 3 && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

pub fn salience_features(query: &Query, doc: &Document) -> SalienceFeatures {
    let terms = query_terms(&query.text);
    let doc_tokens: BTreeSet<String> = tokens(&doc.text).collect();
    let keyword_overlap = if terms.is_empty() {
        0.0
    } else {
        terms.iter().filter(|t| doc_tokens.contains(*t)).count() as f64 / terms.len() as f64
    };
    let digit_tokens = doc
        .text
        .split_whitespace()
        .filter(|t| t.chars().any(|c| c.is_ascii_digit()))
        .count();
    let quote_pairs = doc.text.matches('"').count() / 2;
    let source_markers = doc.text.to_lowercase().matches("according to").count();
    SalienceFeatures {
        keyword_overlap,
        digit_tokens,
        quote_pairs,
        source_markers,
    }
}

/// Largest-remainder apportionment of `total` seats; ties go to the lower index.
/// An all-zero weight vector is treated as uniform.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let clean: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let sum: f64 = clean.iter().sum();
    let clean = if sum > 0.0 {
        clean
    } else {
        vec![1.0; weights.len()]
    };
    let sum: f64 = clean.iter().sum();
    let quotas: Vec<f64> = clean.iter().map(|w| w * total as f64 / sum).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = seats.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        seats[i] += 1;
    }
    seats
}

#[derive(Debug, Clone)]
pub struct SimulatedEngine {
    params: SimulationParams,
}

impl SimulatedEngine {
    pub fn new(params: SimulationParams) -> Result<Self, EngineError> {
        params.validate()?;
        Ok(SimulatedEngine { params })
    }

    pub fn with_seed(seed: u64) -> Self {
        SimulatedEngine {
            params: SimulationParams::with_seed(seed),
        }
    }

    pub fn params(&self) -> &SimulationParams {
        &self.params
    }

    pub fn salience(&self, query: &Query, doc: &Document) -> f64 {
        let f = salience_features(query, doc);
        let p = &self.params;
        p.keyword_overlap_w * f.keyword_overlap
            + p.statistic_w * f.digit_tokens as f64
            + p.quote_w * f.quote_pairs as f64
            + p.citation_marker_w * f.source_markers as f64
    }

    /// Word count of the k-th sentence attributed to any one document.
    fn sentence_words(&self, query: &Query, k: usize) -> usize {
        let mut rng = derived_rng(self.params.seed, &["words", &query.text, &k.to_string()]);
        rng.gen_range(8..=24)
    }

    fn statistic_sentence(&self, doc: &Document, k: usize) -> String {
        let mut rng = derived_rng(self.params.seed, &["stat", &doc.id, &k.to_string()]);
        let pct: u32 = rng.gen_range(12..=88);
        let n: u32 = rng.gen_range(200..=5000);
        format!("Roughly {pct}% of comparable cases follow this pattern, based on {n} observations.")
    }

    /// Applies the profile's content transforms followed by surface markers.
    pub fn rewrite_text(&self, text: &str, g: &Genotype, query: &Query, doc: &Document) -> String {
        let profile = LeverProfile::of(g);
        let reps = if profile.amplify { 2 } else { 1 };
        let original_words: Vec<&str> = text.split_whitespace().collect();

        let body = if profile.shorten {
            let keep = (original_words.len() * 3) / 5;
            original_words[..keep.max(1).min(original_words.len())].join(" ")
        } else {
            text.to_string()
        };

        let mut parts: Vec<String> = Vec::new();
        if profile.source {
            for _ in 0..reps {
                parts.push("According to a recent industry report, this finding holds.".into());
            }
        }
        if !body.is_empty() {
            parts.push(body);
        }
        if profile.statistic {
            for k in 0..reps {
                parts.push(self.statistic_sentence(doc, k));
            }
        }
        if profile.quote {
            for _ in 0..reps {
                parts.push("As one expert put it, \"this matters more than most people realize.\"".into());
            }
        }
        if g.constraints.length_policy == LengthPolicy::Expand {
            parts.push("This point is explained in more detail below.".into());
        }
        if profile.keyword {
            let present: BTreeSet<String> = tokens(text).collect();
            let missing: Vec<String> = query_terms(&query.text)
                .into_iter()
                .filter(|t| !present.contains(t))
                .collect();
            if !missing.is_empty() {
                parts.push(format!("Key terms: {}.", missing.join(", ")));
            }
        }
        let mut out = parts.join(" ");

        let marker = match g.tone.tone {
            Tone::Neutral => None,
            Tone::Assertive => Some("Notably,"),
            Tone::Simple => Some("Simply put,"),
            Tone::Technical => Some("Technically,"),
            Tone::Formal => Some("Formally,"),
        };
        if let Some(m) = marker {
            out = format!("{m} {out}");
        }
        if g.tone.technicality == Technicality::High && g.tone.tone != Tone::Technical {
            out = format!("Technically, {out}");
        }
        if g.format.has_prelude {
            out = format!("In short: {out}");
        }
        out = match g.format.output_schema {
            OutputSchema::Prose => out,
            OutputSchema::Bullets => format!("- {out}"),
            OutputSchema::Sections => format!("## {out}"),
            OutputSchema::Qa => format!("Q&A: {out}"),
        };
        if g.format.use_code_block {
            out = format!("```\n{out}\n```");
        }

        if profile.shorten {
            let limit = original_words.len();
            let words: Vec<&str> = out.split_whitespace().collect();
            if words.len() > limit {
                out = words[..limit].join(" ");
            }
        }
        out
    }
}

impl Engine for SimulatedEngine {
    fn kind(&self) -> BackendKind {
        BackendKind::Simulated
    }

    fn rewrite(&self, doc: &Document, strategy: &Strategy, query: &Query) -> Result<Document, EngineError> {
        let text = self.rewrite_text(&doc.text, &strategy.genotype, query, doc);
        if text.trim().is_empty() {
            return Err(EngineError::EmptyRewrite);
        }
        Ok(doc.with_text(text))
    }

    fn synthesize_answer(&self, query: &Query, candidates: &CandidateSet) -> Result<CitedAnswer, EngineError> {
        if candidates.is_empty() {
            return Err(EngineError::InvalidRequest("empty candidate set".into()));
        }
        let sal: Vec<f64> = candidates.docs.iter().map(|d| self.salience(query, d)).collect();
        let seats = largest_remainder(&sal, self.params.sentences_per_answer);
        let mut order: Vec<usize> = (0..sal.len()).collect();
        order.sort_by(|&a, &b| {
            sal[b].partial_cmp(&sal[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mut sentences = Vec::with_capacity(self.params.sentences_per_answer);
        for idx in order {
            for k in 0..seats[idx] {
                sentences.push(Sentence::with_word_count(self.sentence_words(query, k), [idx + 1]));
            }
        }
        Ok(CitedAnswer::new(sentences))
    }
}

/// Stable fingerprint of a candidate set, used as a cache key.
pub fn candidate_fingerprint(query: &Query, candidates: &CandidateSet) -> u64 {
    let mut parts: Vec<&str> = vec![&query.id, &query.text];
    for d in &candidates.docs {
        parts.push(&d.id);
        parts.push(&d.text);
    }
    hash_str(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{seed_genotypes, StrategyType};
    use crate::impressions::compute_impressions;

    fn q() -> Query {
        Query::new("q1", "solar panel efficiency in winter").unwrap()
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(&[3.0, 1.0, 1.0, 1.0, 0.0], 6), vec![3, 1, 1, 1, 0]);
        assert_eq!(largest_remainder(&[0.0, 0.0, 0.0], 6), vec![2, 2, 2]);
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0, 1.0], 6), vec![2, 2, 1, 1]);
        assert_eq!(largest_remainder(&[1.0, 2.0], 6).iter().sum::<usize>(), 6);
    }

    #[test]
    fn noop_genotype_leaves_text_unchanged() {
        let e = SimulatedEngine::with_seed(1);
        let d = Document::new("d", "Panels lose output in cold weather.");
        let out = e.rewrite(&d, &Strategy::new("s", Genotype::default()), &q()).unwrap();
        assert_eq!(out.text, d.text);
    }

    #[test]
    fn rewrite_is_deterministic() {
        let e = SimulatedEngine::with_seed(9);
        let d = Document::new("d", "Panels lose output in cold weather.");
        for s in seed_genotypes() {
            let a = e.rewrite(&d, &s, &q()).unwrap();
            let b = e.rewrite(&d, &s, &q()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shorten_never_grows() {
        let e = SimulatedEngine::with_seed(3);
        let d = Document::new("d", "one two three four five six seven eight nine ten eleven twelve");
        for bits in 0..64u8 {
            let p = LeverProfile::from_bits(bits);
            if !p.shorten {
                continue;
            }
            let out = e.rewrite(&d, &Strategy::new("s", p.representative()), &q()).unwrap();
            assert!(out.word_count() <= d.word_count(), "profile {bits}: {}", out.text);
        }
    }

    #[test]
    fn representative_round_trips_profile() {
        for p in LeverProfile::all() {
            let g = p.representative();
            g.validate().unwrap();
            assert_eq!(LeverProfile::of(&g), p);
        }
    }

    #[test]
    fn identical_docs_get_identical_word_scores() {
        let e = SimulatedEngine::with_seed(5);
        let text = "Solar panel output drops in winter.";
        let c = CandidateSet::new(vec![Document::new("a", text), Document::new("b", text)], 0).unwrap();
        let ans = e.synthesize_answer(&q(), &c).unwrap();
        assert_eq!(compute_impressions(&ans, 1).word, compute_impressions(&ans, 2).word);
    }

    #[test]
    fn dominant_doc_leads_the_answer() {
        let e = SimulatedEngine::with_seed(5);
        let c = CandidateSet::new(
            vec![
                Document::new("a", "Cats sleep."),
                Document::new(
                    "b",
                    "According to tests, solar panel efficiency in winter is 15% lower, \"a known effect\".",
                ),
                Document::new("c", "Dogs bark."),
            ],
            0,
        )
        .unwrap();
        let ans = e.synthesize_answer(&q(), &c).unwrap();
        assert!(ans.sentences[0].citations.contains(&2));
        assert_eq!(ans.len(), 6);
    }

    #[test]
    fn tone_and_format_do_not_move_salience() {
        let e = SimulatedEngine::with_seed(2);
        let d = Document::new("d", "Solar output drops in winter months.");
        let mut g = Genotype::with_intent(StrategyType::Authoritative);
        g.tone.tone = Tone::Formal;
        g.format.output_schema = OutputSchema::Qa;
        g.format.use_code_block = true;
        let out = e.rewrite(&d, &Strategy::new("s", g), &q()).unwrap();
        assert_ne!(out.text, d.text);
        assert_eq!(salience_features(&q(), &out), salience_features(&q(), &d));
    }

    #[test]
    fn statistic_lever_raises_salience() {
        let e = SimulatedEngine::with_seed(2);
        let d = Document::new("d", "Solar output drops in winter months.");
        let g = Genotype::with_intent(StrategyType::StatisticsAddition);
        let out = e.rewrite(&d, &Strategy::new("s", g), &q()).unwrap();
        assert!(e.salience(&q(), &out) > e.salience(&q(), &d));
    }
}
