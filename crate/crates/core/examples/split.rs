//! Random and cold-start splits with sampled evaluation candidates.
//!
//! cargo run --example split

use kg_utilization::split::{
    eligible_users, make_cold_start, random_split, sample_negatives, ColdStartConfig, SplitRatios,
};
use kg_utilization::synthetic::{generate, KgSignal, SyntheticConfig};
use kg_utilization::RngStream;

fn main() -> kg_utilization::Result<()> {
    let cfg = SyntheticConfig {
        interactions_per_user: 30,
        ..Default::default()
    };
    let b = generate(&cfg, KgSignal::Planted, &RngStream::new(2, "data", 0))?;
    let ds = &b.dataset;

    let split = random_split(&ds.interactions, SplitRatios::default(), &RngStream::new(2, "split", 0))?;
    println!("random split: {} / {} / {}", split.train.len(), split.valid.len(), split.test.len());
    let test = sample_negatives(&split, ds.item_count(), 50, &RngStream::new(2, "test", 0));
    let row = &test.rows[0];
    println!(
        "user {} ranks {} candidates ({} positives)",
        row.user,
        row.items.len(),
        row.n_positives()
    );

    println!("eligible for cold start: {}", eligible_users(&ds.interactions, 25).len());
    for t in [1, 3, 5] {
        let cold = make_cold_start(&ds.interactions, &ColdStartConfig::new(t), &RngStream::new(2, "cold", 0))?;
        let test = sample_negatives(&cold, ds.item_count(), 50, &RngStream::new(2, "test", 0))
            .restrict(&cold.cold_users);
        println!(
            "T={t}: {} cold users, train {}, {} cold test rows",
            cold.cold_users.len(),
            cold.train.len(),
            test.rows.len()
        );
    }
    Ok(())
}
