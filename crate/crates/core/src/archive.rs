//! MAP-Elites archive of strategies keyed by behavioral descriptor.
//!
//! Each cell keeps at most `cell_capacity` elites, sorted by reward. Entry is
//! guarded by a novelty gate (character n-gram Jaccard on summaries) and a
//! value gate (a full cell only accepts a candidate that beats its worst
//! elite). A global capacity is enforced by [`Archive::prune`], which drops
//! the lowest PND elites.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{Descriptor, Reward, Strategy, CATALOG};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveConfig {
    pub cell_capacity: usize,
    pub global_capacity: usize,
    pub lambda_pnd: f64,
    pub novelty_threshold: f64,
    pub ngram: usize,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        ArchiveConfig {
            cell_capacity: 3,
            global_capacity: 35,
            lambda_pnd: 0.3,
            novelty_threshold: 0.9,
            ngram: 3,
        }
    }
}

impl ArchiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_capacity == 0 {
            return Err(Error::Config {
                key: "k_c".into(),
                message: "cell capacity must be at least 1".into(),
            });
        }
        if self.global_capacity == 0 {
            return Err(Error::Config {
                key: "archive_capacity".into(),
                message: "archive capacity must be at least 1".into(),
            });
        }
        if !self.lambda_pnd.is_finite() || self.lambda_pnd < 0.0 {
            return Err(Error::Config {
                key: "lambda_pnd".into(),
                message: "must be a finite non-negative number".into(),
            });
        }
        if self.ngram == 0 {
            return Err(Error::Config {
                key: "ngram".into(),
                message: "n-gram size must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Sorted set of character n-grams. Grams of up to three characters are
/// packed exactly into a `u64`; longer grams are hashed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NgramSet(Vec<u64>);

impl NgramSet {
    pub fn new(s: &str, n: usize) -> Self {
        let chars: Vec<char> = s.chars().collect();
        let mut grams: Vec<u64> = if chars.len() < n {
            Vec::new()
        } else {
            chars.windows(n).map(pack_gram).collect()
        };
        grams.sort_unstable();
        grams.dedup();
        NgramSet(grams)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn jaccard(&self, other: &NgramSet) -> f64 {
        if self.0.is_empty() && other.0.is_empty() {
            return 1.0;
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        inter as f64 / (a.len() + b.len() - inter) as f64
    }
}

fn pack_gram(w: &[char]) -> u64 {
    if w.len() <= 3 {
        w.iter().fold(0u64, |acc, &c| (acc << 21) | c as u64) | ((w.len() as u64) << 63)
    } else {
        let s: String = w.iter().collect();
        crate::util::hash_str(&[&s])
    }
}

/// Jaccard similarity of the character n-gram sets of two strings.
/// Two strings without any n-gram are identical by convention.
pub fn ngram_similarity(a: &str, b: &str, n: usize) -> f64 {
    assert!(n >= 1, "n-gram size must be positive");
    NgramSet::new(a, n).jaccard(&NgramSet::new(b, n))
}

/// Lineage/genotype richness in [0, 1].
pub fn diversity(s: &Strategy) -> f64 {
    let depth = (s.lineage.depth.min(5)) as f64 / 5.0;
    let ops: BTreeSet<&str> = s.lineage.operators.iter().map(String::as_str).collect();
    let ops = ops.len().min(CATALOG.len()) as f64 / CATALOG.len() as f64;
    let fields = s.genotype.active_field_fraction();
    (depth + ops + fields) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PndComponents {
    pub reward: f64,
    pub novelty: f64,
    pub diversity: f64,
    pub pnd: f64,
}

impl PndComponents {
    pub fn new(reward: f64, novelty: f64, diversity: f64, lambda_pnd: f64) -> Self {
        PndComponents {
            reward,
            novelty,
            diversity,
            pnd: reward + lambda_pnd * (novelty + diversity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    /// Insertion order; smaller is older.
    pub seq: u64,
    pub strategy: Strategy,
    pub descriptor: Descriptor,
    pub pnd: PndComponents,
    #[serde(skip)]
    grams: NgramSet,
}

impl Elite {
    pub fn reward(&self) -> f64 {
        self.strategy.reward.map(|r| r.value).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArchiveCell {
    pub key: Option<Descriptor>,
    pub elites: Vec<Elite>,
}

impl ArchiveCell {
    pub fn min_reward(&self) -> Option<f64> {
        self.elites.last().map(Elite::reward)
    }

    fn sort(&mut self) {
        self.elites.sort_by(|a, b| {
            b.reward()
                .partial_cmp(&a.reward())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.seq.cmp(&b.seq))
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InsertDecision {
    Inserted,
    Replaced { worst_id: String },
    RejectedNovelty { similar_to: String },
    RejectedValue,
}

impl InsertDecision {
    pub fn accepted(&self) -> bool {
        matches!(self, InsertDecision::Inserted | InsertDecision::Replaced { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    config: ArchiveConfig,
    cells: BTreeMap<Descriptor, ArchiveCell>,
    next_seq: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    lambda_pnd: f64,
    capacity: usize,
    cell_capacity: usize,
    novelty_threshold: f64,
    ngram: usize,
    next_seq: u64,
}

impl Archive {
    pub fn new(config: ArchiveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Archive {
            config,
            cells: BTreeMap::new(),
            next_seq: 0,
        })
    }

    pub fn config(&self) -> &ArchiveConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.cells.values().map(|c| c.elites.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = (&Descriptor, &ArchiveCell)> {
        self.cells.iter()
    }

    pub fn cell(&self, key: &Descriptor) -> Option<&ArchiveCell> {
        self.cells.get(key)
    }

    /// Elites in cell order, best first within each cell.
    pub fn elites(&self) -> impl Iterator<Item = &Elite> {
        self.cells.values().flat_map(|c| c.elites.iter())
    }

    pub fn strategies(&self) -> impl Iterator<Item = &Strategy> {
        self.elites().map(|e| &e.strategy)
    }

    pub fn get(&self, id: &str) -> Option<&Elite> {
        self.elites().find(|e| e.strategy.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// Highest-reward elite (ties: older first).
    pub fn best_by_reward(&self) -> Option<&Elite> {
        self.elites().fold(None, |best: Option<&Elite>, e| match best {
            Some(b) if b.reward() > e.reward() || (b.reward() == e.reward() && b.seq < e.seq) => {
                Some(b)
            }
            _ => Some(e),
        })
    }

    /// 1 − the highest similarity to any archived elite other than `s` itself.
    pub fn novelty(&self, s: &Strategy) -> f64 {
        let grams = NgramSet::new(&s.summary, self.config.ngram);
        self.novelty_of(&s.id, &grams)
    }

    fn novelty_of(&self, id: &str, grams: &NgramSet) -> f64 {
        let max_sim = self
            .elites()
            .filter(|e| e.strategy.id != id)
            .map(|e| grams.jaccard(&e.grams))
            .fold(f64::NEG_INFINITY, f64::max);
        if max_sim == f64::NEG_INFINITY {
            1.0
        } else {
            1.0 - max_sim
        }
    }

    /// PND components of `s` against the current archive. `s` must carry a reward.
    pub fn pnd_score(&self, s: &Strategy) -> Result<PndComponents> {
        let reward = s
            .reward_value()
            .ok_or_else(|| Error::Contract(format!("strategy `{}` has no reward", s.id)))?;
        Ok(PndComponents::new(
            reward,
            self.novelty(s),
            diversity(s),
            self.config.lambda_pnd,
        ))
    }

    /// Recomputes PND components of every elite against the current archive.
    pub fn refresh_pnd(&mut self) {
        let lambda = self.config.lambda_pnd;
        let fresh: Vec<(Descriptor, usize, PndComponents)> = self
            .cells
            .iter()
            .flat_map(|(k, c)| c.elites.iter().enumerate().map(move |(i, e)| (*k, i, e)))
            .map(|(k, i, e)| {
                let nov = self.novelty_of(&e.strategy.id, &e.grams);
                (k, i, PndComponents::new(e.reward(), nov, diversity(&e.strategy), lambda))
            })
            .collect();
        for (k, i, p) in fresh {
            self.cells.get_mut(&k).expect("cell exists").elites[i].pnd = p;
        }
    }

    /// Offers `s` with `reward` to its descriptor cell.
    pub fn try_insert(&mut self, mut s: Strategy, reward: Reward) -> Result<InsertDecision> {
        if !reward.value.is_finite() {
            return Err(Error::Validation(format!(
                "reward for `{}` is not finite",
                s.id
            )));
        }
        if self.contains(&s.id) {
            return Err(Error::Contract(format!("strategy id `{}` already archived", s.id)));
        }
        s.reward = Some(reward);
        let key = s.descriptor();
        let grams = NgramSet::new(&s.summary, self.config.ngram);

        if let Some(cell) = self.cells.get(&key) {
            let threshold = self.config.novelty_threshold;
            if let Some(e) = cell.elites.iter().find(|e| grams.jaccard(&e.grams) > threshold) {
                return Ok(InsertDecision::RejectedNovelty {
                    similar_to: e.strategy.id.clone(),
                });
            }
            if cell.elites.len() >= self.config.cell_capacity {
                let worst = cell.elites.last().expect("full cell is non-empty");
                if reward.value <= worst.reward() {
                    return Ok(InsertDecision::RejectedValue);
                }
            }
        }

        let pnd = PndComponents::new(
            reward.value,
            self.novelty_of(&s.id, &grams),
            diversity(&s),
            self.config.lambda_pnd,
        );
        let elite = Elite {
            seq: self.next_seq,
            strategy: s,
            descriptor: key,
            pnd,
            grams,
        };
        self.next_seq += 1;
        let cap = self.config.cell_capacity;
        let cell = self.cells.entry(key).or_insert_with(|| ArchiveCell {
            key: Some(key),
            elites: Vec::new(),
        });
        let decision = if cell.elites.len() >= cap {
            let worst = cell.elites.pop().expect("full cell is non-empty");
            InsertDecision::Replaced {
                worst_id: worst.strategy.id,
            }
        } else {
            InsertDecision::Inserted
        };
        cell.elites.push(elite);
        cell.sort();
        Ok(decision)
    }

    /// Removes lowest-PND elites until the global capacity holds. A cell's
    /// last elite is only removed when every remaining candidate is a sole
    /// elite. Ties remove the older elite first.
    pub fn prune(&mut self) -> Vec<String> {
        let mut removed = Vec::new();
        if self.len() <= self.config.global_capacity {
            return removed;
        }
        self.refresh_pnd();
        while self.len() > self.config.global_capacity {
            let pick = |floor: bool| {
                self.cells
                    .iter()
                    .filter(|(_, c)| !floor || c.elites.len() > 1)
                    .flat_map(|(k, c)| c.elites.iter().map(move |e| (*k, e)))
                    .min_by(|(_, a), (_, b)| {
                        a.pnd
                            .pnd
                            .partial_cmp(&b.pnd.pnd)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then(a.seq.cmp(&b.seq))
                    })
                    .map(|(k, e)| (k, e.seq))
            };
            let Some((key, seq)) = pick(true).or_else(|| pick(false)) else {
                break;
            };
            let cell = self.cells.get_mut(&key).expect("cell exists");
            let pos = cell.elites.iter().position(|e| e.seq == seq).expect("elite exists");
            removed.push(cell.elites.remove(pos).strategy.id);
            if cell.elites.is_empty() {
                self.cells.remove(&key);
            }
        }
        self.refresh_pnd();
        removed
    }

    /// Samples up to `n` distinct elites: a uniformly chosen cell, then an
    /// elite within it with probability proportional to its shifted PND.
    pub fn sample_parents<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Strategy> {
        let total = self.len();
        if n >= total {
            return self.strategies().cloned().collect();
        }
        let mut taken: BTreeSet<u64> = BTreeSet::new();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let open: Vec<&ArchiveCell> = self
                .cells
                .values()
                .filter(|c| c.elites.iter().any(|e| !taken.contains(&e.seq)))
                .collect();
            let cell = open[rng.gen_range(0..open.len())];
            let avail: Vec<&Elite> = cell.elites.iter().filter(|e| !taken.contains(&e.seq)).collect();
            let min = avail.iter().map(|e| e.pnd.pnd).fold(f64::INFINITY, f64::min);
            // Shift so the weakest elite keeps a floor weight of 0.1.
            let weights: Vec<f64> = avail.iter().map(|e| e.pnd.pnd - min + 0.1).collect();
            let sum: f64 = weights.iter().sum();
            let mut x = rng.gen::<f64>() * sum;
            let mut chosen = avail[avail.len() - 1];
            for (e, w) in avail.iter().zip(&weights) {
                if x < *w {
                    chosen = e;
                    break;
                }
                x -= w;
            }
            taken.insert(chosen.seq);
            out.push(chosen.strategy.clone());
        }
        out
    }

    /// Global descending PND order, ties newer first.
    pub fn top_k_by_pnd(&self, k: usize) -> Vec<Strategy> {
        let mut all: Vec<&Elite> = self.elites().collect();
        all.sort_by(|a, b| {
            b.pnd
                .pnd
                .partial_cmp(&a.pnd.pnd)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.seq.cmp(&a.seq))
        });
        all.into_iter().take(k).map(|e| e.strategy.clone()).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            format_version: ARCHIVE_FORMAT_VERSION,
            lambda_pnd: self.config.lambda_pnd,
            capacity: self.config.global_capacity,
            cell_capacity: self.config.cell_capacity,
            novelty_threshold: self.config.novelty_threshold,
            ngram: self.config.ngram,
            next_seq: self.next_seq,
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for e in self.elites() {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or(Error::Format {
            what: "archive",
            line: 1,
            message: "missing header line".into(),
        })?;
        let header: Header = serde_json::from_str(head).map_err(|e| Error::Format {
            what: "archive",
            line: 1,
            message: e.to_string(),
        })?;
        if header.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(Error::Format {
                what: "archive",
                line: 1,
                message: format!("unsupported format version {}", header.format_version),
            });
        }
        let config = ArchiveConfig {
            cell_capacity: header.cell_capacity,
            global_capacity: header.capacity,
            lambda_pnd: header.lambda_pnd,
            novelty_threshold: header.novelty_threshold,
            ngram: header.ngram,
        };
        let mut archive = Archive::new(config)?;
        archive.next_seq = header.next_seq;
        for (i, line) in lines {
            let fmt_err = |message: String| Error::Format {
                what: "archive",
                line: i + 1,
                message,
            };
            let mut e: Elite = serde_json::from_str(line).map_err(|e| fmt_err(e.to_string()))?;
            e.strategy.validate().map_err(|err| fmt_err(err.to_string()))?;
            if e.strategy.reward.is_none() {
                return Err(fmt_err(format!("elite `{}` has no reward", e.strategy.id)));
            }
            if e.descriptor != e.strategy.descriptor() {
                return Err(fmt_err(format!("elite `{}` has a stale descriptor", e.strategy.id)));
            }
            e.grams = NgramSet::new(&e.strategy.summary, archive.config.ngram);
            let key = e.descriptor;
            archive
                .cells
                .entry(key)
                .or_insert_with(|| ArchiveCell {
                    key: Some(key),
                    elites: Vec::new(),
                })
                .elites
                .push(e);
        }
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(f).lines() {
            text.push_str(&line.map_err(|e| Error::io(path, e))?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{
        seed_genotypes, Genotype, OutputSchema, RewardSource, StrategyType, Tone,
    };

    fn ge(v: f64) -> Reward {
        Reward {
            value: v,
            source: RewardSource::Ge,
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(ngram_similarity("abcde", "abcde", 3), 1.0);
        assert!((ngram_similarity("abcd", "bcde", 3) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ngram_similarity("abc", "xyz", 3), 0.0);
        assert_eq!(ngram_similarity("", "", 3), 1.0);
    }

    #[test]
    fn diversity_examples() {
        let mut s = Strategy::new("s", Genotype::default());
        assert_eq!(diversity(&s), 0.0);
        s.lineage.depth = 1;
        s.lineage.operators = vec!["mut_T_toggle_tone".into()];
        let f = s.genotype.active_field_fraction();
        assert!((diversity(&s) - (0.2 + 1.0 / 14.0 + f) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pnd_arithmetic() {
        let p = PndComponents::new(0.6, 0.4, 0.2, 0.3);
        assert!((p.pnd - 0.78).abs() < 1e-12);
        assert_eq!(PndComponents::new(0.6, 0.4, 0.2, 0.0).pnd, 0.6);
        assert_eq!(PndComponents::new(0.6, 0.0, 0.0, 0.3).pnd, 0.6);
    }

    #[test]
    fn novelty_against_empty_and_duplicate() {
        let mut a = Archive::new(ArchiveConfig::default()).unwrap();
        let s = Strategy::new("x", Genotype::with_intent(StrategyType::Authoritative));
        assert_eq!(a.novelty(&s), 1.0);
        a.try_insert(s.clone(), ge(0.1)).unwrap();
        let twin = Strategy::new("y", s.genotype.clone());
        assert_eq!(a.novelty(&twin), 0.0);
        assert!(matches!(
            a.try_insert(twin, ge(0.5)).unwrap(),
            InsertDecision::RejectedNovelty { .. }
        ));
    }

    /// Three distinct genotypes sharing a cell.
    fn cellmates() -> Vec<Genotype> {
        let base = Genotype::with_intent(StrategyType::Authoritative);
        let mut out = Vec::new();
        for clauses in [vec![], vec![0usize], vec![1], vec![2], vec![0, 1, 2, 3]] {
            let mut g = base.clone();
            g.constraints.clauses = clauses
                .iter()
                .map(|&i| crate::genotype::vocab::STRENGTHEN_CLAUSES[i].text.to_string())
                .collect();
            out.push(g);
        }
        out
    }

    #[test]
    fn value_gate_replaces_worst() {
        let gs = cellmates();
        let mut a = Archive::new(ArchiveConfig::default()).unwrap();
        for (i, r) in [0.9, 0.8, 0.7].iter().enumerate() {
            assert_eq!(
                a.try_insert(Strategy::new(format!("s{i}"), gs[i].clone()), ge(*r)).unwrap(),
                InsertDecision::Inserted
            );
        }
        let d = a.try_insert(Strategy::new("new", gs[4].clone()), ge(0.75)).unwrap();
        assert_eq!(d, InsertDecision::Replaced { worst_id: "s2".into() });
        let key = descriptor_of(&gs[0]);
        let rewards: Vec<f64> = a.cell(&key).unwrap().elites.iter().map(Elite::reward).collect();
        assert_eq!(rewards, vec![0.9, 0.8, 0.75]);
        let d = a.try_insert(Strategy::new("low", gs[3].clone()), ge(0.1)).unwrap();
        assert_eq!(d, InsertDecision::RejectedValue);
    }

    fn descriptor_of(g: &Genotype) -> Descriptor {
        crate::genotype::descriptor(g)
    }

    fn distinct_cells() -> Vec<Genotype> {
        let mut out = Vec::new();
        for t in [Tone::Neutral, Tone::Assertive, Tone::Formal, Tone::Simple] {
            let mut g = Genotype::default();
            g.tone.tone = t;
            out.push(g);
        }
        out
    }

    #[test]
    fn prune_removes_lowest_pnd() {
        let cfg = ArchiveConfig {
            global_capacity: 2,
            lambda_pnd: 0.0,
            ..Default::default()
        };
        let mut a = Archive::new(cfg.clone()).unwrap();
        let gs = distinct_cells();
        for (i, r) in [0.9, 0.5, 0.4].iter().enumerate() {
            a.try_insert(Strategy::new(format!("s{i}"), gs[i].clone()), ge(*r)).unwrap();
        }
        assert_eq!(a.prune(), vec!["s2".to_string()]);
        assert_eq!(a.len(), 2);
        assert!(a.prune().is_empty());
    }

    #[test]
    fn prune_respects_cell_floor() {
        let cfg = ArchiveConfig {
            global_capacity: 2,
            lambda_pnd: 0.0,
            ..Default::default()
        };
        let mut a = Archive::new(cfg).unwrap();
        let mates = cellmates();
        a.try_insert(Strategy::new("solo", distinct_cells()[1].clone()), ge(0.1)).unwrap();
        a.try_insert(Strategy::new("m0", mates[0].clone()), ge(0.9)).unwrap();
        a.try_insert(Strategy::new("m1", mates[1].clone()), ge(0.5)).unwrap();
        assert_eq!(a.prune(), vec!["m1".to_string()]);
        assert!(a.contains("solo"));
    }

    #[test]
    fn sampling_and_top_k() {
        let mut a = Archive::new(ArchiveConfig::default()).unwrap();
        for (i, s) in seed_genotypes().into_iter().enumerate() {
            a.try_insert(s, ge(i as f64)).unwrap();
        }
        a.refresh_pnd();
        let mut rng = crate::util::derived_rng(1, &["t"]);
        let all = a.sample_parents(100, &mut rng);
        assert_eq!(all.len(), 9);
        let some = a.sample_parents(4, &mut rng);
        let ids: BTreeSet<&str> = some.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), 4);
        let top = a.top_k_by_pnd(1);
        assert_eq!(top[0].id, "seed-statistics-addition");
        assert_eq!(a.top_k_by_pnd(25).len(), 9);
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical() {
        let mut a = Archive::new(ArchiveConfig::default()).unwrap();
        for (i, s) in seed_genotypes().into_iter().enumerate() {
            a.try_insert(s, ge(0.1 * i as f64 + 1.0 / 3.0)).unwrap();
        }
        let mut g = Genotype::default();
        g.format.output_schema = OutputSchema::Bullets;
        a.try_insert(Strategy::new("b", g), ge(-2.5)).unwrap();
        let text = a.to_jsonl().unwrap();
        let back = Archive::from_jsonl(&text).unwrap();
        assert_eq!(back.to_jsonl().unwrap(), text);
        assert_eq!(back, a);
    }
}
