//! Fills a MAP-Elites archive with the seeds and random one-step variants,
//! then shows the occupied cells, the PND ranking and the JSONL form.
//!
//!     cargo run --example archive

use geo_evolve::archive::{Archive, ArchiveConfig};
use geo_evolve::genotype::{apply_operator, seed_genotypes, Reward, RewardSource, Strategy, CATALOG};
use geo_evolve::util::derived_rng;
use rand::seq::SliceRandom;
use rand::Rng;

fn main() -> geo_evolve::Result<()> {
    let mut archive = Archive::new(ArchiveConfig::default())?;
    let mut rng = derived_rng(3, &["archive-example"]);
    for s in seed_genotypes() {
        let r = rng.gen_range(0.0..5.0);
        archive.try_insert(s, Reward { value: r, source: RewardSource::Ge })?;
    }
    let mut accepted = 0;
    for i in 0..200 {
        let parents: Vec<Strategy> = archive.strategies().cloned().collect();
        let parent = parents.choose(&mut rng).unwrap();
        let op = *CATALOG
            .iter()
            .filter(|o| !o.is_crossover() && o.is_applicable(&parent.genotype))
            .collect::<Vec<_>>()
            .choose(&mut rng)
            .unwrap();
        let g = apply_operator(*op, &parent.genotype, None, &mut rng)?;
        let child = Strategy::child(format!("v{i:03}"), g, parent, None, *op);
        let reward = Reward { value: rng.gen_range(0.0..10.0), source: RewardSource::Critic };
        if archive.try_insert(child, reward)?.accepted() {
            accepted += 1;
        }
    }
    archive.refresh_pnd();
    let pruned = archive.prune();
    println!("accepted {accepted} of 200 variants, pruned {}, size {}", pruned.len(), archive.len());
    println!("occupied cells: {}", archive.cells().count());

    println!("\ntop 5 by PND:");
    for s in archive.top_k_by_pnd(5) {
        let e = archive.get(&s.id).unwrap();
        println!("  {:<24} reward {:>6.2}  {}", s.id, e.reward(), s.summary);
    }
    let jsonl = archive.to_jsonl()?;
    let back = Archive::from_jsonl(&jsonl)?;
    assert_eq!(back.to_jsonl()?, jsonl);
    println!("\nfirst JSONL line:\n{}", jsonl.lines().next().unwrap_or(""));
    Ok(())
}
