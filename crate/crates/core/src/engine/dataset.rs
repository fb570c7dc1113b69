//! Instance datasets: a seeded synthetic generator and a JSON Lines loader.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::types::{CandidateSet, Document, Instance, Query};
use crate::util::derived_rng;

const TOPICS: &[&str] = &[
    "solar", "battery", "coral", "glacier", "vaccine", "protein", "bridge", "railway", "wheat",
    "copper", "satellite", "volcano", "river", "forest", "insulin", "sleep", "coffee", "bamboo",
    "turbine", "lithium", "plankton", "asteroid", "malaria", "hydrogen", "tunnel", "orchard",
    "glucose", "monsoon", "graphene", "sourdough", "telescope", "migration", "compost", "marathon",
];

const ASPECTS: &[&str] = &[
    "efficiency", "lifespan", "costs", "risks", "benefits", "recycling", "growth", "decline",
    "safety", "storage", "yield", "pollution", "demand", "erosion", "resistance", "adoption",
];

const FILLER_SUBJECTS: &[&str] = &[
    "researchers", "engineers", "farmers", "analysts", "doctors", "planners", "communities",
    "manufacturers", "observers", "regulators",
];

const FILLER_VERBS: &[&str] = &[
    "describe", "monitor", "debate", "measure", "document", "question", "compare", "review",
];

const FILLER_OBJECTS: &[&str] = &[
    "trends", "outcomes", "methods", "tradeoffs", "conditions", "changes", "designs", "factors",
];

/// Shape of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub queries: usize,
    pub docs_per_query: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            queries: 20,
            docs_per_query: 5,
            seed: 0,
        }
    }
}

fn filler_sentence<R: rand::Rng>(rng: &mut R) -> String {
    format!(
        "{} {} the {}.",
        capitalize(FILLER_SUBJECTS.choose(rng).unwrap()),
        FILLER_VERBS.choose(rng).unwrap(),
        FILLER_OBJECTS.choose(rng).unwrap()
    )
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn document_text<R: rand::Rng>(rng: &mut R, terms: &[&str]) -> String {
    let mut sentences = Vec::new();
    let mut used: Vec<&str> = terms.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if used.is_empty() {
        used.push(terms[rng.gen_range(0..terms.len())]);
    }
    sentences.push(format!(
        "{} {} the {} of {}.",
        capitalize(FILLER_SUBJECTS.choose(rng).unwrap()),
        FILLER_VERBS.choose(rng).unwrap(),
        FILLER_OBJECTS.choose(rng).unwrap(),
        used.join(" ")
    ));
    for _ in 0..rng.gen_range(1..=3) {
        sentences.push(filler_sentence(rng));
    }
    if rng.gen_bool(0.4) {
        let n: u32 = rng.gen_range(2..=95);
        sentences.push(format!("About {n} percent of sites report this."));
    }
    if rng.gen_bool(0.3) {
        sentences.push("Critics call it \"a modest change\" at best.".into());
    }
    if rng.gen_bool(0.3) {
        sentences.push("According to local surveys, opinions vary.".into());
    }
    let tail = sentences.split_off(1);
    let mut tail = tail;
    tail.shuffle(rng);
    sentences.extend(tail);
    sentences.join(" ")
}

/// Seeded synthetic dataset; queries are short topic phrases and each
/// candidate set mixes partial keyword coverage with occasional statistics,
/// quotations and attributions.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Vec<Instance> {
    let mut rng = derived_rng(spec.seed, &["dataset"]);
    (0..spec.queries)
        .map(|qi| {
            let topic = TOPICS.choose(&mut rng).unwrap();
            let mut aspects: Vec<&str> = ASPECTS.choose_multiple(&mut rng, 2).copied().collect();
            aspects.sort();
            let terms: Vec<&str> = std::iter::once(*topic).chain(aspects.iter().copied()).collect();
            let query = Query {
                id: format!("q{qi:03}"),
                text: format!("{} {} and {}", topic, aspects[0], aspects[1]),
            };
            let docs = (0..spec.docs_per_query.max(1))
                .map(|di| Document::new(format!("q{qi:03}-d{di}"), document_text(&mut rng, &terms)))
                .collect();
            let target = rng.gen_range(0..spec.docs_per_query.max(1));
            let candidates = CandidateSet::new(docs, target).expect("generated set is valid");
            Instance::new(query, candidates)
        })
        .collect()
}

/// Loads one instance per line; blank lines are skipped.
pub fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut inst: Instance = serde_json::from_str(&line).map_err(|e| Error::Format {
            what: "instance",
            line: i + 1,
            message: e.to_string(),
        })?;
        inst.candidates = CandidateSet::new(inst.candidates.docs, inst.candidates.target_index)?;
        inst.validate()?;
        out.push(inst);
    }
    if out.is_empty() {
        return Err(Error::Validation(format!("{} contains no instances", path.display())));
    }
    Ok(out)
}

pub fn save_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for inst in instances {
        writeln!(f, "{}", serde_json::to_string(inst)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
