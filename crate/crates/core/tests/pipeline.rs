use std::collections::BTreeSet;

use kg_utilization::models::{train, ModelConfig, ModelKind, TrainInput};
use kg_utilization::perturb::{self, PerturbKind, PerturbSpec};
use kg_utilization::runner::{original_graph, split_for_repeat, train_stream};
use kg_utilization::split::{ColdStartConfig, SplitRatios};
use kg_utilization::synthetic::{generate, KgSignal, SyntheticConfig};
use kg_utilization::{metrics, RngStream};

fn data() -> kg_utilization::Bundle {
    let cfg = SyntheticConfig {
        n_users: 60,
        n_items: 60,
        interactions_per_user: 28,
        groups_per_block: 3,
        ..Default::default()
    };
    generate(&cfg, KgSignal::Planted, &RngStream::new(5, "data", 0)).unwrap()
}

#[test]
fn same_stream_same_model() {
    let b = data();
    let kg = original_graph(&b, true).unwrap();
    let ds = &b.dataset;
    let d = split_for_repeat(ds, 5, SplitRatios::default(), None, 30, 0).unwrap();
    let input = TrainInput {
        dataset: ds,
        split: &d.split,
        valid: &d.valid,
        graph: Some((&kg, &ds.links)),
    };
    let cfg = ModelConfig {
        max_epochs: 4,
        ..Default::default()
    };
    for kind in ModelKind::ALL {
        let s = train_stream(5, kind, 0, 0);
        let a = train(kind, &input, &cfg, &s).unwrap();
        let b = train(kind, &input, &cfg, &s).unwrap();
        assert_eq!(a.params, b.params, "{kind}");
        let other = train(kind, &input, &cfg, &train_stream(5, kind, 0, 1)).unwrap();
        assert_ne!(a.params, other.params, "{kind}");
    }
}

#[test]
fn cold_start_pipeline_evaluates_only_cold_users() {
    let b = data();
    let ds = &b.dataset;
    let cold = ColdStartConfig::new(3);
    let d = split_for_repeat(ds, 5, SplitRatios::default(), Some(cold), 30, 0).unwrap();
    let users: BTreeSet<_> = d.test.users().collect();
    assert_eq!(users, d.split.cold_users);
    assert_eq!(users.len(), 6);

    let kg = original_graph(&b, true).unwrap();
    let distorted = PerturbSpec::ratio(PerturbKind::Distort, 0.5)
        .unwrap()
        .apply(&kg, &RngStream::new(5, "p", 0))
        .unwrap();
    let input = TrainInput {
        dataset: ds,
        split: &d.split,
        valid: &d.valid,
        graph: Some((&distorted, &ds.links)),
    };
    let cfg = ModelConfig {
        max_epochs: 3,
        ..Default::default()
    };
    let model = train(ModelKind::KgcnLite, &input, &cfg, &RngStream::new(5, "t", 0)).unwrap();
    let r = model.evaluate(&d.test).unwrap();
    assert_eq!(r.users.len(), 6);
    let m = metrics::mrr(&r).unwrap();
    assert!((0.0..=1.0).contains(&m));
}

#[test]
fn regime_graphs_plug_into_training() {
    let b = data();
    let ds = &b.dataset;
    let d = split_for_repeat(ds, 5, SplitRatios::default(), None, 30, 0).unwrap();
    let inter = perturb::to_interaction_kg(&d.split.train, ds, &b.kg).unwrap();
    let selfkg = perturb::to_self_kg(ds, &b.kg).unwrap();
    let cfg = ModelConfig {
        max_epochs: 2,
        ..Default::default()
    };
    for g in [&inter, &selfkg] {
        for kind in [ModelKind::CfkgLite, ModelKind::KgcnLite] {
            let input = TrainInput {
                dataset: ds,
                split: &d.split,
                valid: &d.valid,
                graph: Some((&g.kg, &g.links)),
            };
            let m = train(kind, &input, &cfg, &RngStream::new(5, "t", 0)).unwrap();
            assert!(m.evaluate(&d.test).is_ok());
        }
    }
}
