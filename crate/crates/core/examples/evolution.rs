//! A short co-evolution run on the simulated engine with per-iteration
//! reports and regret tracking. Artifacts land in `target/evolution-example`.
//!
//!     cargo run --release --example evolution [iterations]

use std::path::Path;

use geo_evolve::coevolution::{verified_best, Coevolution, RegretOracle};
use geo_evolve::config::RunConfig;
use geo_evolve::engine::dataset::synthetic_dataset;
use geo_evolve::engine::{Evaluator, SimulatedEngine};
use geo_evolve::genotype::{seed_genotypes, Strategy};

fn main() -> geo_evolve::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let cfg = RunConfig { iterations, ..Default::default() };
    let instances = synthetic_dataset(&cfg.dataset_spec());
    let engine = SimulatedEngine::new(cfg.simulation_params())?;
    let mut run = Coevolution::new(cfg.clone(), Evaluator::new(engine), instances.clone())?;
    let oracle = RegretOracle::build(&Evaluator::new(SimulatedEngine::new(cfg.simulation_params())?), &instances)?;
    println!("best achievable mean gain: {:.2}", oracle.best());
    run.enable_regret(oracle);

    for _ in 0..iterations {
        let r = run.step()?;
        println!(
            "t={:>3} ctx {:<14} evaluated {} inserted {} best {:>6.2} regret {:>6.2}",
            r.iteration,
            r.context_id,
            r.evaluated,
            r.inserted,
            r.best_ge.unwrap_or(f64::NAN),
            r.regret.unwrap_or(f64::NAN)
        );
    }
    let out = Path::new("target/evolution-example");
    run.save(out)?;

    let checker = Evaluator::new(SimulatedEngine::new(cfg.simulation_params())?);
    let archived: Vec<Strategy> = run.archive.strategies().cloned().collect();
    let seeds = seed_genotypes();
    let (sid, sg) = verified_best(&checker, &instances, &seeds)?.unwrap();
    let (aid, ag) = verified_best(&checker, &instances, &archived)?.unwrap();
    println!("\nseed-only best {sid}: {sg:.2}\nevolved best   {aid}: {ag:.2}");
    println!("{}", run.archive.get(&aid).unwrap().strategy.prompt());
    println!("artifacts in {}", out.display());
    Ok(())
}
