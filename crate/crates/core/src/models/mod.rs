//! Reference recommenders and their shared trainer.
//!
//! Three models, one per family:
//!
//! * `bpr_mf` ignores the KG: dot-product matrix factorization with a
//!   pairwise ranking loss.
//! * `cfkg_lite` embeds users, items and KG entities in one translation
//!   space. The training graph is the interaction graph joined with the item
//!   KG; a user's score for an item is `-|e_u + r_interact - e_i|`.
//! * `kgcn_lite` adds to each item embedding an attention-weighted sum over a
//!   fixed sample of its outgoing KG neighbors, the attention being
//!   `softmax(p_u . r)` over the sampled relations.
//!
//! All three use plain SGD, uniform initialization in `[-1/sqrt(d), 1/sqrt(d)]`
//! and early stopping on validation MRR.

mod bpr;
mod cfkg;
pub mod checkpoint;
mod kgcn;
pub mod loss;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataio::{InteractionDataset, LinkTable};
use crate::error::{Error, Result};
use crate::kg::{ItemId, KnowledgeGraph, UserId};
use crate::metrics::{self, RankedUser, RankingResult};
use crate::rng::{Rng, RngStream};
use crate::split::{CandidateRow, DatasetSplit, EvalCandidates};

pub use bpr::train_bpr_mf;
pub use cfkg::train_cfkg_lite;
pub use kgcn::{sample_neighbors, train_kgcn_lite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BprMf,
    CfkgLite,
    KgcnLite,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [Self::BprMf, Self::CfkgLite, Self::KgcnLite];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BprMf => "bpr_mf",
            Self::CfkgLite => "cfkg_lite",
            Self::KgcnLite => "kgcn_lite",
        }
    }

    pub fn uses_kg(self) -> bool {
        self != Self::BprMf
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpr_mf" => Ok(Self::BprMf),
            "cfkg_lite" => Ok(Self::CfkgLite),
            "kgcn_lite" => Ok(Self::KgcnLite),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub l2_weight: f64,
    pub neighbor_sample_size: usize,
    pub train_neg_per_pos: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 16,
            learning_rate: 0.05,
            margin: 1.0,
            l2_weight: 1e-4,
            neighbor_sample_size: 4,
            train_neg_per_pos: 1,
            max_epochs: 100,
            patience: 50,
        }
    }
}

impl ModelConfig {
    /// Every field must be positive, except `max_epochs` (0 returns the
    /// initialization) and `l2_weight` (0 disables regularization).
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("model config: {what}")));
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be non-negative");
        }
        if self.neighbor_sample_size == 0 || self.train_neg_per_pos == 0 || self.patience == 0 {
            return bad("neighbor_sample_size, train_neg_per_pos and patience must be positive");
        }
        Ok(())
    }
}

/// Row-major `f32` embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Table {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Uniform in `[-1/sqrt(dim), 1/sqrt(dim))`.
    pub fn uniform(rows: usize, dim: usize, rng: &mut Rng) -> Self {
        let b = 1.0 / (dim as f64).sqrt();
        Self {
            rows,
            dim,
            data: (0..rows * dim).map(|_| rng.uniform(-b, b) as f32).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&x| f64::from(x)).collect()
    }

    /// `row[i] -= step * grad`.
    pub fn descend(&mut self, i: usize, grad: &[f64], step: f64) {
        for (x, g) in self.row_mut(i).iter_mut().zip(grad) {
            *x = (f64::from(*x) - step * g) as f32;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Learned state of one model.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Bpr {
        users: Table,
        items: Table,
    },
    Cfkg {
        entities: Table,
        relations: Table,
        /// Joint-graph entity row of each user.
        user_rows: Vec<u32>,
        /// Joint-graph entity row of each item.
        item_rows: Vec<u32>,
        interact: u32,
    },
    Kgcn {
        users: Table,
        entities: Table,
        relations: Table,
        /// Entity row of each item.
        item_rows: Vec<u32>,
        /// Fixed `(relation, tail)` sample per item; empty for items without
        /// outgoing facts.
        neighbors: Vec<Vec<(u32, u32)>>,
    },
}

impl Params {
    fn tables(&self) -> Vec<&Table> {
        match self {
            Self::Bpr { users, items } => vec![users, items],
            Self::Cfkg {
                entities, relations, ..
            } => vec![entities, relations],
            Self::Kgcn {
                users,
                entities,
                relations,
                ..
            } => vec![users, entities, relations],
        }
    }

    fn is_finite(&self) -> bool {
        self.tables().iter().all(|t| t.is_finite())
    }

    /// Unchecked score; callers validate ids.
    fn score(&self, u: usize, i: usize) -> f64 {
        match self {
            Self::Bpr { users, items } => users
                .row(u)
                .iter()
                .zip(items.row(i))
                .map(|(a, b)| f64::from(*a) * f64::from(*b))
                .sum(),
            Self::Cfkg {
                entities,
                relations,
                user_rows,
                item_rows,
                interact,
            } => -loss::transe_distance(
                &entities.get(user_rows[u] as usize),
                &relations.get(*interact as usize),
                &entities.get(item_rows[i] as usize),
            ),
            Self::Kgcn {
                users,
                entities,
                relations,
                item_rows,
                neighbors,
            } => {
                let p = users.get(u);
                let (own, rels, tails) = kgcn::gather(entities, relations, item_rows[i], &neighbors[i]);
                loss::kgcn_score(
                    &p,
                    loss::Neighborhood {
                        own: &own,
                        relations: &rels,
                        tails: &tails,
                    },
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's examples (NaN for epoch 0).
    #[serde(with = "nan_as_null")]
    pub loss: f64,
    /// Validation MRR after the epoch (NaN when there is no validation set).
    #[serde(with = "nan_as_null")]
    pub valid_mrr: f64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub n_users: usize,
    pub n_items: usize,
    pub params: Params,
    /// Epoch 0 is the initialization.
    pub log: Vec<EpochRecord>,
    /// Epoch of the returned snapshot.
    pub best_epoch: usize,
}

impl TrainedModel {
    pub fn score(&self, u: UserId, i: ItemId) -> Result<f64> {
        if u.index() >= self.n_users {
            return Err(Error::OutOfVocabulary(format!("user {u}")));
        }
        if i.index() >= self.n_items {
            return Err(Error::OutOfVocabulary(format!("item {i}")));
        }
        Ok(self.params.score(u.index(), i.index()))
    }

    /// Candidates sorted by descending score, ties by ascending item id.
    pub fn rank_candidates(&self, u: UserId, candidates: &[ItemId]) -> Result<Vec<ItemId>> {
        let scored = candidates
            .iter()
            .map(|&i| Ok((self.score(u, i)?, i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(rank_scored(scored))
    }

    pub fn evaluate(&self, candidates: &EvalCandidates) -> Result<RankingResult> {
        evaluate_with(candidates, |row| {
            let items: Vec<ItemId> = row.items.iter().map(|(i, _)| *i).collect();
            self.rank_candidates(row.user, &items)
        })
    }

    pub fn best_valid_mrr(&self) -> f64 {
        self.log[self.best_epoch].valid_mrr
    }
}

/// Sort `(score, item)` pairs by descending score, then ascending item id.
pub fn rank_scored(mut scored: Vec<(f64, ItemId)>) -> Vec<ItemId> {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}

fn evaluate_with(
    candidates: &EvalCandidates,
    mut rank: impl FnMut(&CandidateRow) -> Result<Vec<ItemId>>,
) -> Result<RankingResult> {
    let mut users = Vec::with_capacity(candidates.rows.len());
    for row in &candidates.rows {
        let ranked = rank(row)?;
        let positives: BTreeSet<ItemId> = row.positives().collect();
        users.push(RankedUser::new(row.user, &ranked, &positives)?);
    }
    Ok(RankingResult::new(users))
}

fn params_mrr(params: &Params, candidates: &EvalCandidates) -> Result<f64> {
    if candidates.rows.is_empty() {
        return Ok(f64::NAN);
    }
    let result = evaluate_with(candidates, |row| {
        Ok(rank_scored(
            row.items
                .iter()
                .map(|&(i, _)| (params.score(row.user.index(), i.index()), i))
                .collect(),
        ))
    })?;
    metrics::mrr(&result)
}

/// What every trainer consumes.
#[derive(Debug, Clone, Copy)]
pub struct TrainInput<'a> {
    pub dataset: &'a InteractionDataset,
    pub split: &'a DatasetSplit,
    /// Candidates used for early stopping.
    pub valid: &'a EvalCandidates,
    /// Item KG and the item -> entity links into it (ignored by `bpr_mf`).
    pub graph: Option<(&'a KnowledgeGraph, &'a LinkTable)>,
}

impl<'a> TrainInput<'a> {
    fn check(&self) -> Result<()> {
        if self.split.train.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        Ok(())
    }

    fn graph(&self, kind: ModelKind) -> Result<(&'a KnowledgeGraph, &'a LinkTable)> {
        self.graph
            .ok_or_else(|| Error::InvalidArgument(format!("{kind} needs a knowledge graph")))
    }

    fn train_sets(&self) -> Vec<HashSet<u32>> {
        let mut sets = vec![HashSet::new(); self.dataset.user_count()];
        for x in &self.split.train {
            sets[x.user.index()].insert(x.item.0);
        }
        sets
    }
}

pub fn train(
    kind: ModelKind,
    input: &TrainInput<'_>,
    cfg: &ModelConfig,
    stream: &RngStream,
) -> Result<TrainedModel> {
    match kind {
        ModelKind::BprMf => train_bpr_mf(input, cfg, stream),
        ModelKind::CfkgLite => train_cfkg_lite(input, cfg, stream),
        ModelKind::KgcnLite => train_kgcn_lite(input, cfg, stream),
    }
}

/// Uniform item the user has not interacted with in train. Falls back to
/// any item after a bounded number of rejections.
fn sample_negative(rng: &mut Rng, n_items: usize, seen: &HashSet<u32>) -> u32 {
    let mut j = rng.below(n_items) as u32;
    for _ in 0..64 {
        if !seen.contains(&j) {
            break;
        }
        j = rng.below(n_items) as u32;
    }
    j
}

/// Epoch loop with early stopping shared by every model.
///
/// `epoch` runs one pass of SGD and returns the mean loss. The snapshot with
/// the highest validation MRR is kept (earliest on ties); training stops
/// after `patience` epochs without improvement.
fn fit(
    kind: ModelKind,
    input: &TrainInput<'_>,
    cfg: &ModelConfig,
    mut params: Params,
    rng: &mut Rng,
    mut epoch: impl FnMut(&mut Params, &mut Rng) -> f64,
) -> Result<TrainedModel> {
    let initial = params_mrr(&params, input.valid)?;
    let mut log = vec![EpochRecord {
        epoch: 0,
        loss: f64::NAN,
        valid_mrr: initial,
    }];
    let mut best = (0usize, initial, params.clone());
    for e in 1..=cfg.max_epochs {
        let loss = epoch(&mut params, rng);
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged {
                epoch: e,
                learning_rate: cfg.learning_rate,
            });
        }
        let valid_mrr = params_mrr(&params, input.valid)?;
        log.push(EpochRecord {
            epoch: e,
            loss,
            valid_mrr,
        });
        // without validation data the latest epoch wins
        if valid_mrr.is_nan() || valid_mrr > best.1 {
            best = (e, valid_mrr, params.clone());
        } else if e - best.0 >= cfg.patience {
            log::debug!("{kind}: early stop at epoch {e}, best {}", best.0);
            break;
        }
    }
    Ok(TrainedModel {
        kind,
        config: *cfg,
        n_users: input.dataset.user_count(),
        n_items: input.dataset.item_count(),
        params: best.2,
        log,
        best_epoch: best.0,
    })
}
