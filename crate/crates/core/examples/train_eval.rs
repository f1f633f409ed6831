//! Train the three recommenders on a synthetic dataset, evaluate them on
//! sampled candidates and round-trip a checkpoint.
//!
//! cargo run --release --example train_eval

use kg_utilization::metrics::evaluate;
use kg_utilization::models::{checkpoint, train, ModelConfig, ModelKind, TrainInput};
use kg_utilization::runner::{original_graph, split_for_repeat, train_stream};
use kg_utilization::split::SplitRatios;
use kg_utilization::synthetic::{generate, KgSignal, SyntheticConfig};
use kg_utilization::RngStream;

fn main() -> kg_utilization::Result<()> {
    let b = generate(&SyntheticConfig::default(), KgSignal::Planted, &RngStream::new(3, "data", 0))?;
    let kg = original_graph(&b, true)?;
    let ds = &b.dataset;
    let data = split_for_repeat(ds, 3, SplitRatios::default(), None, 50, 0)?;
    let input = TrainInput {
        dataset: ds,
        split: &data.split,
        valid: &data.valid,
        graph: Some((&kg, &ds.links)),
    };
    let cfg = ModelConfig {
        max_epochs: 60,
        patience: 20,
        ..Default::default()
    };
    for kind in ModelKind::ALL {
        let model = train(kind, &input, &cfg, &train_stream(3, kind, 0, 0))?;
        let result = model.evaluate(&data.test)?;
        let line: Vec<String> = evaluate(&result, 10)?
            .iter()
            .map(|m| format!("{} {:.3}", m.name, m.value))
            .collect();
        println!("{kind:<10} epoch {:>3}  {}", model.best_epoch, line.join("  "));

        let bytes = checkpoint::to_bytes(&model)?;
        let back = checkpoint::from_bytes(&bytes)?;
        assert_eq!(back.params, model.params);
    }
    Ok(())
}
