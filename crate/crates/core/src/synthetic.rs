//! Synthetic datasets with known KG usefulness.
//!
//! Users and items are split into preference blocks, and each block's items
//! into groups. Every user has a home group inside their block and draws
//! interactions mostly from the block, preferring the home group, with a
//! popularity skew. The KG links every item to one group entity and to a
//! few tag entities:
//!
//! * [`KgSignal::Planted`]: the group is the item's true group, so the KG
//!   encodes block membership and the finer group structure preferences
//!   depend on.
//! * [`KgSignal::Noise`]: the group is drawn independently of everything.
//!
//! Tags are always random.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataio::{Bundle, Interaction, InteractionDataset};
use crate::error::{Error, Result};
use crate::kg::{EntityId, Fact, ItemId, KnowledgeGraph, RelationId};
use crate::rng::{Rng, RngStream};

pub const GROUP_RELATION: &str = "in_group";
pub const TAG_RELATION: &str = "tagged";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgSignal {
    Planted,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_blocks: usize,
    pub interactions_per_user: usize,
    /// Probability that an interaction falls inside the user's block.
    pub in_block: f64,
    /// Zipf exponent of item popularity inside a block (0 = uniform).
    pub popularity: f64,
    /// Groups per block; each user has one home group in their block.
    pub groups_per_block: usize,
    /// Probability that an in-block interaction falls inside the home group.
    pub in_group: f64,
    pub n_tags: usize,
    pub tags_per_item: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 100,
            n_blocks: 2,
            interactions_per_user: 15,
            in_block: 0.95,
            popularity: 0.5,
            groups_per_block: 10,
            in_group: 0.7,
            n_tags: 10,
            tags_per_item: 1,
        }
    }
}

/// Block of user `u` / item `i`: contiguous equal ranges.
pub fn block_of(index: usize, count: usize, n_blocks: usize) -> usize {
    index * n_blocks / count
}

fn weighted_pick(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.unit_f64() * total;
    for (k, w) in weights.iter().enumerate() {
        if x < *w {
            return k;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Generate interactions, KG and links. Every item is linked to entity `i`
/// (labelled `e<i>`); group and tag entities follow.
pub fn generate(cfg: &SyntheticConfig, signal: KgSignal, stream: &RngStream) -> Result<Bundle> {
    let per_block_items = cfg.n_items / cfg.n_blocks.max(1);
    if cfg.n_blocks == 0 || per_block_items == 0 || cfg.n_users < cfg.n_blocks {
        return Err(Error::InvalidArgument(
            "synthetic: need at least one user and one item per block".into(),
        ));
    }
    if cfg.interactions_per_user >= per_block_items {
        return Err(Error::InvalidArgument(
            "synthetic: interactions_per_user must be below the block size".into(),
        ));
    }
    if cfg.tags_per_item > cfg.n_tags {
        return Err(Error::InvalidArgument("synthetic: tags_per_item > n_tags".into()));
    }
    let n_groups = cfg.n_blocks * cfg.groups_per_block;
    if cfg.groups_per_block == 0 || per_block_items < cfg.groups_per_block {
        return Err(Error::InvalidArgument(
            "synthetic: need at least one item per group".into(),
        ));
    }
    // item -> (block, global group)
    let item_block: Vec<usize> = (0..cfg.n_items)
        .map(|i| block_of(i, cfg.n_items, cfg.n_blocks))
        .collect();
    let blocks: Vec<Vec<usize>> = (0..cfg.n_blocks)
        .map(|b| (0..cfg.n_items).filter(|&i| item_block[i] == b).collect())
        .collect();
    let mut item_group = vec![0usize; cfg.n_items];
    for (b, items) in blocks.iter().enumerate() {
        for (k, &i) in items.iter().enumerate() {
            item_group[i] = b * cfg.groups_per_block + block_of(k, items.len(), cfg.groups_per_block);
        }
    }
    // popularity rank inside each block is a random permutation
    let mut pop_rng = stream.child("popularity").rng();
    let mut weight = vec![0.0; cfg.n_items];
    for items in &blocks {
        let mut ranks: Vec<usize> = (0..items.len()).collect();
        pop_rng.shuffle(&mut ranks);
        for (&i, &r) in items.iter().zip(&ranks) {
            weight[i] = 1.0 / ((r + 1) as f64).powf(cfg.popularity);
        }
    }
    let pick_from = |pool: &[usize], rng: &mut Rng| -> usize {
        let w: Vec<f64> = pool.iter().map(|&i| weight[i]).collect();
        pool[weighted_pick(&w, rng)]
    };
    let groups: Vec<Vec<usize>> = (0..n_groups)
        .map(|g| (0..cfg.n_items).filter(|&i| item_group[i] == g).collect())
        .collect();

    let mut rng = stream.child("interactions").rng();
    let mut interactions = Vec::new();
    for u in 0..cfg.n_users {
        let home = block_of(u, cfg.n_users, cfg.n_blocks);
        let home_group = home * cfg.groups_per_block + rng.below(cfg.groups_per_block);
        let mut chosen = BTreeSet::new();
        while chosen.len() < cfg.interactions_per_user {
            let item = if cfg.n_blocks == 1 || rng.unit_f64() < cfg.in_block {
                if rng.unit_f64() < cfg.in_group {
                    pick_from(&groups[home_group], &mut rng)
                } else {
                    pick_from(&blocks[home], &mut rng)
                }
            } else {
                // uniform over the other blocks
                let k = rng.below(cfg.n_blocks - 1);
                let b = if k >= home { k + 1 } else { k };
                pick_from(&blocks[b], &mut rng)
            };
            chosen.insert(item);
        }
        interactions.extend(chosen.into_iter().map(|i| Interaction::new(u as u32, i as u32)));
    }
    let mut ds = InteractionDataset::new(cfg.n_users, cfg.n_items, interactions)?;
    ds.user_labels = (0..cfg.n_users).map(|u| format!("u{u}")).collect();
    ds.item_labels = (0..cfg.n_items).map(|i| format!("i{i}")).collect();

    let mut labels: Vec<String> = (0..cfg.n_items).map(|i| format!("e{i}")).collect();
    let group0 = labels.len();
    labels.extend((0..n_groups).map(|g| format!("group{g}")));
    let tag0 = labels.len();
    labels.extend((0..cfg.n_tags).map(|t| format!("tag{t}")));
    let mut kg_rng = stream.child("kg").rng();
    let mut facts = Vec::new();
    for (i, &planted) in item_group.iter().enumerate() {
        let group = match signal {
            KgSignal::Planted => planted,
            KgSignal::Noise => kg_rng.below(n_groups),
        };
        facts.push(Fact::new(i as u32, 0, (group0 + group) as u32));
        for t in kg_rng.sample_indices(cfg.n_tags, cfg.tags_per_item) {
            facts.push(Fact::new(i as u32, 1, (tag0 + t) as u32));
        }
    }
    let kg = KnowledgeGraph::with_labels(
        facts,
        labels,
        vec![GROUP_RELATION.to_string(), TAG_RELATION.to_string()],
    )?;
    for i in 0..cfg.n_items {
        ds.links.set(ItemId::from_index(i), EntityId::from_index(i))?;
    }
    Ok(Bundle {
        dataset: ds,
        kg,
        flagged_items: Vec::new(),
    })
}

/// Relation id of the block-encoding relation in a generated KG.
pub fn group_relation(kg: &KnowledgeGraph) -> Option<RelationId> {
    kg.relation_by_label(GROUP_RELATION)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_blocks() {
        let cfg = SyntheticConfig::default();
        let b = generate(&cfg, KgSignal::Planted, &RngStream::new(1, "syn", 0)).unwrap();
        assert_eq!(b.dataset.user_count(), 200);
        assert_eq!(b.dataset.item_count(), 100);
        assert_eq!(b.dataset.interactions.len(), 200 * cfg.interactions_per_user);
        assert!(b.dataset.links.is_total());
        let group = group_relation(&b.kg).unwrap();
        for f in b.kg.facts().iter().filter(|f| f.relation == group) {
            let block = block_of(f.head.index(), 100, 2);
            let group = block * cfg.groups_per_block + block_of(f.head.index() % 50, 50, cfg.groups_per_block);
            assert_eq!(b.kg.entity_label(f.tail), format!("group{group}"));
        }
        let in_block = b
            .dataset
            .interactions
            .iter()
            .filter(|x| block_of(x.user.index(), 200, 2) == block_of(x.item.index(), 100, 2))
            .count() as f64
            / b.dataset.interactions.len() as f64;
        assert!(in_block > 0.8, "{in_block}");
    }

    #[test]
    fn deterministic() {
        let s = RngStream::new(4, "syn", 0);
        let a = generate(&SyntheticConfig::default(), KgSignal::Noise, &s).unwrap();
        let b = generate(&SyntheticConfig::default(), KgSignal::Noise, &s).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.kg, b.kg);
    }
}
