//! Generate a planted-signal dataset and write it as atomic files.
//!
//! cargo run --example synthetic -- [out_dir]

use std::path::PathBuf;

use kg_utilization::dataio::{dataset_stats, write_interactions, write_kg, write_links};
use kg_utilization::synthetic::{generate, KgSignal, SyntheticConfig};
use kg_utilization::RngStream;

fn main() -> kg_utilization::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kgu-synthetic"));
    let cfg = SyntheticConfig::default();
    for signal in [KgSignal::Planted, KgSignal::Noise] {
        let b = generate(&cfg, signal, &RngStream::new(7, "data", 0))?;
        let stats = dataset_stats(&b.dataset)?;
        let kg = b.kg.stats();
        println!(
            "{signal:?}: {} users, {} items, {} interactions (sparsity {:.4}); KG {} facts over {} entities",
            stats.n_users, stats.n_items, stats.n_interactions, stats.sparsity, kg.n_facts, kg.n_entities
        );
        let stem = format!("{signal:?}").to_lowercase();
        let dir = out.join(&stem);
        write_interactions(dir.join(format!("{stem}.inter")), &b.dataset, &b.dataset.interactions)?;
        write_kg(dir.join(format!("{stem}.kg")), &b.kg)?;
        write_links(dir.join(format!("{stem}.link")), &b.dataset, &b.kg)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
