use std::collections::HashMap;

use super::{fit, loss, sample_negative, ModelConfig, ModelKind, Params, Table, TrainInput, TrainedModel};
use crate::error::Result;
use crate::perturb::{INTERACT, INTERACT_TRANS};
use crate::rng::RngStream;

/// Which entities a corrupted tail is drawn from.
#[derive(Debug, Clone, Copy)]
enum TailPool {
    /// Items the head user has not interacted with.
    Items,
    Users,
    Entities,
}

/// Joint vocabulary: the KG's entities, then fresh rows for unlinked items,
/// then one row per user not already present as a `user:<label>` entity.
/// Relations are the KG's plus `interact`/`interact_trans` if missing.
struct JointGraph {
    n_entities: usize,
    n_relations: usize,
    user_rows: Vec<u32>,
    item_rows: Vec<u32>,
    interact: u32,
    /// Interaction facts, both directions.
    cf_facts: Vec<(u32, u32, u32, TailPool)>,
    kg_facts: Vec<(u32, u32, u32, TailPool)>,
}

fn joint_graph(input: &TrainInput<'_>) -> Result<JointGraph> {
    let (kg, links) = input.graph(ModelKind::CfkgLite)?;
    let ds = input.dataset;
    let mut n_entities = kg.entity_count();
    let item_rows: Vec<u32> = (0..ds.item_count())
        .map(|i| match links.entity(crate::kg::ItemId::from_index(i)) {
            Some(e) => e.0,
            None => {
                n_entities += 1;
                (n_entities - 1) as u32
            }
        })
        .collect();
    let by_label: HashMap<&str, u32> = kg
        .entity_labels()
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k as u32))
        .collect();
    let user_rows: Vec<u32> = ds
        .user_labels
        .iter()
        .map(|u| match by_label.get(format!("user:{u}").as_str()) {
            Some(&e) => e,
            None => {
                n_entities += 1;
                (n_entities - 1) as u32
            }
        })
        .collect();
    let mut n_relations = kg.relation_count();
    let mut relation = |label: &str| match kg.relation_by_label(label) {
        Some(r) => r.0,
        None => {
            n_relations += 1;
            (n_relations - 1) as u32
        }
    };
    let interact = relation(INTERACT);
    let interact_trans = relation(INTERACT_TRANS);

    let kg_facts = kg
        .facts()
        .iter()
        .map(|f| (f.head.0, f.relation.0, f.tail.0, TailPool::Entities))
        .collect();
    let mut cf_facts = Vec::with_capacity(2 * input.split.train.len());
    for x in &input.split.train {
        let (u, i) = (user_rows[x.user.index()], item_rows[x.item.index()]);
        cf_facts.push((u, interact, i, TailPool::Items));
        cf_facts.push((i, interact_trans, u, TailPool::Users));
    }
    Ok(JointGraph {
        n_entities,
        n_relations,
        user_rows,
        item_rows,
        interact,
        cf_facts,
        kg_facts,
    })
}

/// Translation model over the interaction graph joined with the item KG.
///
/// An epoch visits every interaction fact once in random order; each visit
/// is followed by one step on a KG fact drawn uniformly, so the KG gets the
/// same number of updates as the interactions whatever its size.
pub fn train_cfkg_lite(input: &TrainInput<'_>, cfg: &ModelConfig, stream: &RngStream) -> Result<TrainedModel> {
    cfg.validate()?;
    input.check()?;
    let g = joint_graph(input)?;
    let d = cfg.embedding_dim;
    let mut init = stream.child("init").rng();
    let params = Params::Cfkg {
        entities: Table::uniform(g.n_entities, d, &mut init),
        relations: Table::uniform(g.n_relations, d, &mut init),
        user_rows: g.user_rows.clone(),
        item_rows: g.item_rows.clone(),
        interact: g.interact,
    };
    let n_items = input.dataset.item_count();
    let n_users = input.dataset.user_count();
    // train sets keyed by joint entity row of the user
    let seen_by_row: HashMap<u32, std::collections::HashSet<u32>> = input
        .train_sets()
        .into_iter()
        .enumerate()
        .map(|(u, s)| (g.user_rows[u], s))
        .collect();
    let empty = std::collections::HashSet::new();
    let mut order: Vec<usize> = (0..g.cf_facts.len()).collect();
    let mut rng = stream.child("sgd").rng();
    fit(ModelKind::CfkgLite, input, cfg, params, &mut rng, |params, rng| {
        let Params::Cfkg {
            entities, relations, ..
        } = params
        else {
            unreachable!()
        };
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut count = 0usize;
        for &k in &order {
            let kg_fact = (!g.kg_facts.is_empty()).then(|| g.kg_facts[rng.below(g.kg_facts.len())]);
            for (h, r, t, pool) in std::iter::once(g.cf_facts[k]).chain(kg_fact) {
                for _ in 0..cfg.train_neg_per_pos {
                    let tc = match pool {
                        TailPool::Items => {
                            let seen = seen_by_row.get(&h).unwrap_or(&empty);
                            g.item_rows[sample_negative(rng, n_items, seen) as usize]
                        }
                        TailPool::Users => g.user_rows[rng.below(n_users)],
                        TailPool::Entities => rng.below(g.n_entities) as u32,
                    };
                    let (h, r, t, tc) = (h as usize, r as usize, t as usize, tc as usize);
                    let grad = loss::transe_margin(
                        &entities.get(h),
                        &relations.get(r),
                        &entities.get(t),
                        &entities.get(tc),
                        cfg.margin,
                        cfg.l2_weight,
                    );
                    entities.descend(h, &grad.head, cfg.learning_rate);
                    relations.descend(r, &grad.relation, cfg.learning_rate);
                    entities.descend(t, &grad.tail, cfg.learning_rate);
                    entities.descend(tc, &grad.corrupt, cfg.learning_rate);
                    total += grad.loss;
                    count += 1;
                }
            }
        }
        total / count.max(1) as f64
    })
}
