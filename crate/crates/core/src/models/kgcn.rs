use super::{fit, loss, sample_negative, ModelConfig, ModelKind, Params, Table, TrainInput, TrainedModel};
use crate::dataio::LinkTable;
use crate::error::Result;
use crate::kg::{ItemId, KnowledgeGraph};
use crate::rng::{Rng, RngStream};

/// Fixed neighbor sample of every item: `size` outgoing `(relation, tail)`
/// pairs of the item's entity. Without replacement when the entity has at
/// least `size` out-edges, otherwise `size` draws with replacement. Items
/// with no out-edges (or no link) get an empty sample.
pub fn sample_neighbors(
    kg: &KnowledgeGraph,
    links: &LinkTable,
    size: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<(u32, u32)>>> {
    (0..links.item_count())
        .map(|i| {
            let Some(e) = links.entity(ItemId::from_index(i)) else {
                return Ok(Vec::new());
            };
            let out = kg.neighbors(e)?;
            if out.is_empty() {
                return Ok(Vec::new());
            }
            let picks: Vec<usize> = if out.len() >= size {
                rng.sample_indices(out.len(), size)
            } else {
                (0..size).map(|_| rng.below(out.len())).collect()
            };
            Ok(picks.into_iter().map(|k| (out[k].0 .0, out[k].1 .0)).collect())
        })
        .collect()
}

pub(super) fn gather(
    entities: &Table,
    relations: &Table,
    item_row: u32,
    sample: &[(u32, u32)],
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (
        entities.get(item_row as usize),
        sample.iter().map(|&(r, _)| relations.get(r as usize)).collect(),
        sample.iter().map(|&(_, t)| entities.get(t as usize)).collect(),
    )
}

/// One-hop propagation model over a fixed neighbor sample.
pub fn train_kgcn_lite(input: &TrainInput<'_>, cfg: &ModelConfig, stream: &RngStream) -> Result<TrainedModel> {
    cfg.validate()?;
    input.check()?;
    let (kg, links) = input.graph(ModelKind::KgcnLite)?;
    let n_items = input.dataset.item_count();
    let mut n_entities = kg.entity_count();
    let item_rows: Vec<u32> = (0..n_items)
        .map(|i| match links.entity(ItemId::from_index(i)) {
            Some(e) => e.0,
            None => {
                n_entities += 1;
                (n_entities - 1) as u32
            }
        })
        .collect();
    let neighbors = sample_neighbors(kg, links, cfg.neighbor_sample_size, &mut stream.child("neighbors").rng())?;
    let d = cfg.embedding_dim;
    let mut init = stream.child("init").rng();
    let params = Params::Kgcn {
        users: Table::uniform(input.dataset.user_count(), d, &mut init),
        entities: Table::uniform(n_entities, d, &mut init),
        relations: Table::uniform(kg.relation_count(), d, &mut init),
        item_rows,
        neighbors,
    };
    let seen = input.train_sets();
    let mut order: Vec<usize> = (0..input.split.train.len()).collect();
    let mut rng = stream.child("sgd").rng();
    fit(ModelKind::KgcnLite, input, cfg, params, &mut rng, |params, rng| {
        let Params::Kgcn {
            users,
            entities,
            relations,
            item_rows,
            neighbors,
        } = params
        else {
            unreachable!()
        };
        rng.shuffle(&mut order);
        let lr = cfg.learning_rate;
        let mut total = 0.0;
        let mut count = 0usize;
        for &k in &order {
            let x = input.split.train[k];
            let (u, i) = (x.user.index(), x.item.index());
            for _ in 0..cfg.train_neg_per_pos {
                let j = sample_negative(rng, n_items, &seen[u]) as usize;
                let p = users.get(u);
                let (oi, ri, ti) = gather(entities, relations, item_rows[i], &neighbors[i]);
                let (oj, rj, tj) = gather(entities, relations, item_rows[j], &neighbors[j]);
                let g = loss::kgcn_bpr(
                    &p,
                    loss::Neighborhood { own: &oi, relations: &ri, tails: &ti },
                    loss::Neighborhood { own: &oj, relations: &rj, tails: &tj },
                    cfg.l2_weight,
                );
                users.descend(u, &g.user, lr);
                for (item, sg) in [(i, &g.pos), (j, &g.neg)] {
                    entities.descend(item_rows[item] as usize, &sg.own, lr);
                    for (slot, &(r, t)) in neighbors[item].iter().enumerate() {
                        relations.descend(r as usize, &sg.relations[slot], lr);
                        entities.descend(t as usize, &sg.tails[slot], lr);
                    }
                }
                total += g.loss;
                count += 1;
            }
        }
        total / count.max(1) as f64
    })
}
