//! Ranking metrics on a hand-made ranking, then KGER and KGUS.
//!
//! cargo run --example metrics

use std::collections::BTreeSet;

use kg_utilization::metrics::{evaluate, kger, kgus, RankedUser, RankingResult};
use kg_utilization::{ItemId, UserId};

fn main() -> kg_utilization::Result<()> {
    let ranked: Vec<ItemId> = [4, 1, 7, 2, 9].map(ItemId).to_vec();
    let positives: BTreeSet<ItemId> = [1, 9].map(ItemId).into();
    let a = RankedUser::new(UserId(0), &ranked, &positives)?;
    let b = RankedUser::new(UserId(1), &ranked, &[ItemId(4)].into())?;
    let result = RankingResult::new(vec![a, b]);
    for m in evaluate(&result, 3)? {
        println!("{:<12} {:.4}", m.name.to_string(), m.value);
    }

    // a KG whose removal costs 10% MRR, at half removal vs full replacement
    let (orig, pert) = (0.40, 0.36);
    println!("KGUS            {:.3}", kgus(orig, pert)?);
    println!("KGER (delta .5) {:.3}", kger(orig, pert, 0.5)?);
    println!("KGER (delta 1)  {:.3}", kger(orig, pert, 1.0)?);
    Ok(())
}
