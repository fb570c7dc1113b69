//! Surrogate critic predicting the impression gain of a strategy in a context.

pub mod features;
pub mod loss;
mod model;
pub mod ndcg;
mod train;

pub use features::{encode, FeatureConfig, FeatureVector};
pub use loss::{hybrid_loss, hybrid_loss_grad, LossBatch, LossParts, WeightedPair};
pub use model::{AdamParams, CriticConfig, CriticModel, Forward, Gradients, Stage};
pub use ndcg::{ndcg_at_k, order_by_score, pairwise_accuracy, spearman};
pub use train::{
    build_offline_labels, calibrate_online, calibration_set, rank_pairs, train_offline, CONTRASTIVE_BAND,
    CalibrationSample, ContextGroup, EpochReport, OfflineData, OfflineLabel, PreferencePair,
    TrainConfig, TrainReport, TrainingSet,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{seed_genotypes, RewardSource};
    use crate::types::{Context, Document, Query};
    use crate::util::derived_rng;
    use rand::Rng;

    fn small_model(seed: u64) -> CriticModel {
        CriticModel::new(CriticConfig {
            features: FeatureConfig {
                hash_dim: 16,
                ngram: 2,
                doc_head_tokens: 8,
            },
            hidden: 4,
            output_scale: 1.5,
            init_scale: 0.5,
            seed,
        })
        .unwrap()
    }

    fn random_sparse(rng: &mut impl Rng, dim: usize) -> FeatureVector {
        let mut map = std::collections::BTreeMap::new();
        for _ in 0..6 {
            map.insert(rng.gen_range(0..dim) as u32, rng.gen_range(-1.0..1.0));
        }
        FeatureVector::from_map(map)
    }

    #[test]
    fn fresh_model_scores_zero() {
        let m = CriticModel::new(CriticConfig::default()).unwrap();
        let ctx = Context::new(Query::new("q", "wind").unwrap(), Document::new("d", "Wind blows."));
        for s in seed_genotypes() {
            assert_eq!(m.score(&ctx, &s), 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = derived_rng(3, &["gc"]);
        let mut model = small_model(1);
        for i in 0..model.hidden() {
            let idx = model.param_count() - 1 - model.hidden() + i;
            model.set_param(idx, rng.gen_range(-1.0..1.0));
        }
        let feats: Vec<FeatureVector> = (0..4).map(|_| random_sparse(&mut rng, model.dim())).collect();
        let batch = LossBatch {
            features: feats.iter().collect(),
            targets: vec![(0, 0.7), (1, -0.3), (2, 2.5), (3, 0.1)],
            pairs: vec![
                WeightedPair { plus: 0, minus: 1, weight: 1.0 / 3.0 },
                WeightedPair { plus: 2, minus: 3, weight: 0.25 },
            ],
        };
        let (_, grads) = hybrid_loss_grad(&model, &batch, 0.2, Stage::Full).unwrap();
        let eps = 1e-6;
        for i in 0..model.param_count() {
            let orig = model.param(i);
            model.set_param(i, orig + eps);
            let up = hybrid_loss(&model, &batch, 0.2).unwrap().total;
            model.set_param(i, orig - eps);
            let down = hybrid_loss(&model, &batch, 0.2).unwrap().total;
            model.set_param(i, orig);
            let numeric = (up - down) / (2.0 * eps);
            let analytic = model.grad_entry(&grads, i);
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            assert!((numeric - analytic).abs() / denom < 1e-4 || (numeric - analytic).abs() < 1e-9,
                "param {i}: numeric {numeric}, analytic {analytic}");
        }
    }

    #[test]
    fn warmup_freezes_first_layer() {
        let mut rng = derived_rng(4, &["warm"]);
        let mut model = small_model(2);
        let last = model.param_count() - 2;
        model.set_param(last, 0.8);
        let feats: Vec<FeatureVector> = (0..3).map(|_| random_sparse(&mut rng, model.dim())).collect();
        let batch = LossBatch {
            features: feats.iter().collect(),
            targets: vec![(0, 1.0), (1, -1.0), (2, 0.5)],
            pairs: vec![WeightedPair { plus: 0, minus: 1, weight: 0.5 }],
        };
        let (_, g) = hybrid_loss_grad(&model, &batch, 0.2, Stage::Warmup).unwrap();
        assert!(g.first_layer_is_zero());
        let (_, g) = hybrid_loss_grad(&model, &batch, 0.2, Stage::Full).unwrap();
        assert!(!g.first_layer_is_zero());
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let mut rng = derived_rng(5, &["lr0"]);
        let mut model = small_model(3);
        let before = model.clone();
        let feats: Vec<FeatureVector> = (0..3).map(|_| random_sparse(&mut rng, model.dim())).collect();
        let set = TrainingSet {
            groups: vec![ContextGroup {
                context_id: "c".into(),
                strategy_ids: vec!["a".into(), "b".into(), "c".into()],
                features: feats,
                gains: vec![1.0, 0.0, -1.0],
                pairs: vec![WeightedPair { plus: 0, minus: 1, weight: 1.0 / 3.0 }],
            }],
        };
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            ..Default::default()
        };
        train_offline(&mut model, &set, &cfg).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn critic_sourced_calibration_is_rejected() {
        let mut model = small_model(4);
        let ctx = Context::new(Query::new("q", "wind").unwrap(), Document::new("d", "Wind blows."));
        let s = &seed_genotypes()[0];
        let samples = [CalibrationSample {
            context: &ctx,
            strategy: s,
            reward: 1.0,
            source: RewardSource::Critic,
        }];
        assert!(calibrate_online(&mut model, &samples, &TrainConfig::default()).is_err());
        let before = model.clone();
        assert_eq!(calibrate_online(&mut model, &[], &TrainConfig::default()).unwrap(), None);
        assert_eq!(model, before);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("critic.json");
        let m = small_model(9);
        m.save(&p).unwrap();
        assert_eq!(CriticModel::load(&p).unwrap(), m);
    }

    #[test]
    fn dense_pairs_count() {
        let ids: Vec<String> = (0..9).map(|i| format!("s{i}")).collect();
        let items: Vec<(&str, f64)> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i as f64)).collect();
        let mut rng = derived_rng(0, &["p"]);
        assert_eq!(rank_pairs(&items, 0, &mut rng).len(), 10);
        let flat: Vec<(&str, f64)> = ids.iter().map(|s| (s.as_str(), 1.0)).collect();
        assert!(rank_pairs(&flat, 3, &mut rng).is_empty());
        let two = [("a", 2.0), ("b", 1.0)];
        let p = rank_pairs(&two, 0, &mut rng);
        assert_eq!(p.len(), 1);
        assert!((p[0].weight - 1.0 / 3.0).abs() < 1e-15);
    }
}
