use super::{fit, loss, sample_negative, ModelConfig, ModelKind, Params, Table, TrainInput, TrainedModel};
use crate::error::Result;
use crate::rng::RngStream;

/// Matrix factorization trained with the pairwise ranking loss. Ignores any
/// graph in `input`.
pub fn train_bpr_mf(input: &TrainInput<'_>, cfg: &ModelConfig, stream: &RngStream) -> Result<TrainedModel> {
    cfg.validate()?;
    input.check()?;
    let d = cfg.embedding_dim;
    let n_items = input.dataset.item_count();
    let mut init = stream.child("init").rng();
    let params = Params::Bpr {
        users: Table::uniform(input.dataset.user_count(), d, &mut init),
        items: Table::uniform(n_items, d, &mut init),
    };
    let seen = input.train_sets();
    let mut order: Vec<usize> = (0..input.split.train.len()).collect();
    let mut rng = stream.child("sgd").rng();
    fit(ModelKind::BprMf, input, cfg, params, &mut rng, |params, rng| {
        let Params::Bpr { users, items } = params else {
            unreachable!()
        };
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut count = 0usize;
        for &k in &order {
            let x = input.split.train[k];
            let (u, i) = (x.user.index(), x.item.index());
            for _ in 0..cfg.train_neg_per_pos {
                let j = sample_negative(rng, n_items, &seen[u]) as usize;
                let g = loss::bpr(&users.get(u), &items.get(i), &items.get(j), cfg.l2_weight);
                users.descend(u, &g.user, cfg.learning_rate);
                items.descend(i, &g.pos, cfg.learning_rate);
                items.descend(j, &g.neg, cfg.learning_rate);
                total += g.loss;
                count += 1;
            }
        }
        total / count.max(1) as f64
    })
}
