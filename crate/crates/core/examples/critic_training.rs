//! Labels strategies with the simulated engine, trains the critic offline
//! and reports held-out ranking quality.
//!
//!     cargo run --example critic_training

use geo_evolve::cli::{labeling_pool, ndcg_report};
use geo_evolve::critic::{build_offline_labels, train_offline, CriticModel, TrainConfig, TrainingSet, CONTRASTIVE_BAND};
use geo_evolve::engine::dataset::{synthetic_dataset, SyntheticSpec};
use geo_evolve::engine::{Evaluator, SimulatedEngine};
use geo_evolve::util::derived_rng;

fn main() -> geo_evolve::Result<()> {
    let evaluator = Evaluator::new(SimulatedEngine::with_seed(0));
    let pool = labeling_pool(0, 27)?;
    let train = synthetic_dataset(&SyntheticSpec { queries: 16, docs_per_query: 5, seed: 1 });
    let held_out = synthetic_dataset(&SyntheticSpec { queries: 6, docs_per_query: 5, seed: 2 });

    let mut rng = derived_rng(0, &["example-labels"]);
    let train_data = build_offline_labels(&evaluator, &train, &pool, CONTRASTIVE_BAND, &mut rng)?;
    let test_data = build_offline_labels(&evaluator, &held_out, &pool, CONTRASTIVE_BAND, &mut rng)?;
    println!("{} labels, {} preference pairs", train_data.labels.len(), train_data.pairs.len());

    let mut critic = CriticModel::new(Default::default())?;
    println!("untrained held-out: {:?}", ndcg_report(&critic, &test_data)?);
    let set = TrainingSet::from_offline(&train_data, &critic)?;
    let cfg = TrainConfig { epochs: 30, freeze_epochs: 5, ..Default::default() };
    let report = train_offline(&mut critic, &set, &cfg)?;
    for e in report.epochs.iter().step_by(5) {
        println!("epoch {:>2} {:?} total {:.4}", e.epoch, e.stage, e.loss.total);
    }
    println!("trained held-out:   {:?}", ndcg_report(&critic, &test_data)?);
    Ok(())
}
