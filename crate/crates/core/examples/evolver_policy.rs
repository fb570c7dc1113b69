//! One hand-driven evolver round: propose children, score them, compute
//! sibling-aware advantages and apply an advantage-weighted update.
//!
//!     cargo run --example evolver_policy

use geo_evolve::engine::dataset::{synthetic_dataset, SyntheticSpec};
use geo_evolve::engine::{Evaluator, SimulatedEngine};
use geo_evolve::evolver::{
    awr_update, propose_candidates, sibling_advantage, EvolverPolicy, Experience, SiblingChild, SiblingGroup,
};
use geo_evolve::genotype::seed_genotypes;
use geo_evolve::util::derived_rng;

fn main() -> geo_evolve::Result<()> {
    let inst = &synthetic_dataset(&SyntheticSpec { queries: 1, ..Default::default() })[0];
    let ctx = inst.context();
    let evaluator = Evaluator::new(SimulatedEngine::with_seed(0));
    let mut policy = EvolverPolicy::default();
    let mut rng = derived_rng(0, &["evolver-example"]);
    let seeds = seed_genotypes();
    let parents = vec![seeds[0].clone(), seeds[4].clone()];

    for round in 0..5 {
        let proposals = propose_candidates(&policy, &ctx, &parents, (8, 0), &format!("r{round}"), &mut rng);
        let parent_gain = evaluator.evaluate(&ctx, &parents[0], &inst.candidates)?.reward().unwrap_or(0.0);
        let mut children = Vec::new();
        for p in &proposals {
            let gain = evaluator.evaluate(&ctx, &p.strategy, &inst.candidates)?.reward().unwrap_or(0.0);
            children.push(SiblingChild { strategy_id: p.strategy.id.clone(), reward: gain, pnd: 0.0 });
        }
        let group = SiblingGroup { parent_id: parents[0].id.clone(), parent_reward: parent_gain, children };
        let adv = sibling_advantage(&group, 0.8)?;
        let exps: Vec<Experience> = proposals
            .iter()
            .zip(&adv)
            .map(|(p, a)| Experience {
                features: p.features.clone(),
                mask: p.mask.clone(),
                operator: p.operator,
                advantage: *a,
            })
            .collect();
        let report = awr_update(&mut policy, &exps, 1.0, 0.05)?;
        let best = proposals.iter().zip(&adv).max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        println!(
            "round {round}: best child {} via {} (advantage {:+.3}), loss {:.4}",
            best.0.strategy.id,
            best.0.operator,
            best.1,
            report.map_or(f64::NAN, |r| r.loss)
        );
    }
    Ok(())
}
