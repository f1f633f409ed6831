//! Every KG perturbation on a synthetic graph, with self-loop placeholders
//! protecting the item nodes.
//!
//! cargo run --example perturb

use std::collections::BTreeSet;

use kg_utilization::perturb::{self, PerturbKind, PerturbSpec};
use kg_utilization::split::{random_split, SplitRatios};
use kg_utilization::synthetic::{generate, group_relation, KgSignal, SyntheticConfig};
use kg_utilization::RngStream;

fn main() -> kg_utilization::Result<()> {
    let b = generate(&SyntheticConfig::default(), KgSignal::Planted, &RngStream::new(1, "data", 0))?;
    let items: BTreeSet<_> = b.dataset.links.iter().map(|(_, e)| e).collect();
    let original = perturb::add_self_loop_placeholders(&b.kg, &items)?;
    println!("original: {} facts ({} placeholders)", original.facts().len(), items.len());

    for kind in [
        PerturbKind::Distort,
        PerturbKind::DeleteFacts,
        PerturbKind::DeleteEntities,
        PerturbKind::DeleteRelations,
    ] {
        for ratio in [0.25, 0.5, 1.0] {
            let stream = RngStream::new(1, format!("perturb/{kind}/{ratio}"), 0);
            let kg = PerturbSpec::ratio(kind, ratio)?.apply(&original, &stream)?;
            println!(
                "{kind:<17} {ratio:<5} {:>4} facts, {} relations in use",
                kg.facts().len(),
                kg.relation_histogram().iter().filter(|&&c| c > 0).count()
            );
        }
    }

    let group = group_relation(&original).expect("synthetic KG has a group relation");
    let kg = PerturbSpec::remove_relation(group).apply(&original, &RngStream::new(1, "unused", 0))?;
    println!("without {:<9} {:>4} facts", original.relation_label(group), kg.facts().len());

    let split = random_split(&b.dataset.interactions, SplitRatios::default(), &RngStream::new(1, "split", 0))?;
    let inter = perturb::to_interaction_kg(&split.train, &b.dataset, &b.kg)?;
    let selfkg = perturb::to_self_kg(&b.dataset, &b.kg)?;
    println!("interaction KG: {} facts", inter.kg.facts().len());
    println!("self KG:        {} facts", selfkg.kg.facts().len());
    Ok(())
}
