//! Runs the nine seed strategies through the deterministic simulated engine
//! and prints the impression gain each one earns per query.
//!
//!     cargo run --example simulated_engine

use geo_evolve::engine::dataset::{synthetic_dataset, SyntheticSpec};
use geo_evolve::engine::{Engine, Evaluator, LeverProfile, SimulatedEngine};
use geo_evolve::genotype::seed_genotypes;

fn main() -> geo_evolve::Result<()> {
    let instances = synthetic_dataset(&SyntheticSpec { queries: 4, ..Default::default() });
    let evaluator = Evaluator::new(SimulatedEngine::with_seed(7));
    let seeds = seed_genotypes();

    let first = &instances[0];
    let ctx = first.context();
    println!("query: {}\ndocument: {}\n", ctx.query.text, ctx.document.text);
    let rewritten = evaluator.engine().rewrite(&ctx.document, &seeds[2], &ctx.query)?;
    println!("after `{}`:\n{}\n", seeds[2].id, rewritten.text);

    print!("{:<28}", "strategy");
    for inst in &instances {
        print!(" {:>8}", inst.query.id);
    }
    println!("  levers");
    for s in &seeds {
        print!("{:<28}", s.id);
        for inst in &instances {
            let gain = evaluator.evaluate(&inst.context(), s, &inst.candidates)?;
            match gain.reward() {
                Some(g) => print!(" {g:>8.2}"),
                None => print!(" {:>8}", "n/a"),
            }
        }
        println!("  {:06b}", LeverProfile::of(&s.genotype).bits());
    }
    println!("\nbaseline syntheses: {}", evaluator.baseline_syntheses());
    Ok(())
}
