//! Evolves a small archive, then rewrites a fresh document turn by turn
//! with the trained critic choosing each strategy.
//!
//!     cargo run --release --example planner

use geo_evolve::coevolution::Coevolution;
use geo_evolve::config::RunConfig;
use geo_evolve::engine::dataset::synthetic_dataset;
use geo_evolve::engine::{Evaluator, SimulatedEngine};
use geo_evolve::impressions::compute_impressions;
use geo_evolve::planner::{optimize, render_trace_table};
use geo_evolve::engine::Engine;

fn main() -> geo_evolve::Result<()> {
    let cfg = RunConfig { iterations: 40, ..Default::default() };
    let instances = synthetic_dataset(&cfg.dataset_spec());
    let engine = SimulatedEngine::new(cfg.simulation_params())?;
    let mut run = Coevolution::new(cfg.clone(), Evaluator::new(engine.clone()), instances.clone())?;
    run.run(None)?;

    let inst = &instances[3];
    let (doc, trace) = optimize(
        &inst.query,
        inst.candidates.target(),
        &run.archive,
        &run.critic,
        &engine,
        cfg.planner_top_k,
        cfg.planner_max_steps,
    )?;
    print!("{}", render_trace_table(&trace));
    let before = engine.synthesize_answer(&inst.query, &inst.candidates)?;
    let after = engine.synthesize_answer(&inst.query, &inst.candidates.with_target_text(&doc.text))?;
    let t = inst.candidates.target_citation();
    println!(
        "overall impression {:.2} -> {:.2}",
        compute_impressions(&before, t).overall,
        compute_impressions(&after, t).overall
    );
    println!("\nfinal document:\n{}", doc.text);
    Ok(())
}
