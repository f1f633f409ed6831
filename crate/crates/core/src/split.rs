//! Train/valid/test splitting, evaluation candidates and the cold-start protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{self, Interaction, InteractionDataset};
use crate::error::{Error, Result};
use crate::kg::{ItemId, UserId};
use crate::perturb::selection_count;
use crate::rng::{RngStream, STREAM_ALGORITHM};

pub const DEFAULT_NEGATIVES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be non-negative: {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// `(n_train, n_valid, n_test)` for `n` interactions: the first two are
    /// rounded half-up, the test part takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = selection_count(self.train, n);
        let valid = selection_count(self.valid, n).min(n - train);
        (train, valid, n - train - valid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Interaction>,
    pub valid: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub cold_users: BTreeSet<UserId>,
    /// Cold-start training budget, 0 for a plain split.
    #[serde(rename = "T")]
    pub t: usize,
}

impl DatasetSplit {
    /// Items each user has in any part of the split.
    pub fn rated_items(&self) -> BTreeMap<UserId, BTreeSet<ItemId>> {
        let mut rated: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
        for x in self.train.iter().chain(&self.valid).chain(&self.test) {
            rated.entry(x.user).or_default().insert(x.item);
        }
        rated
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffle uniformly and cut into contiguous train/valid/test slices.
pub fn random_split(
    interactions: &[Interaction],
    ratios: SplitRatios,
    stream: &RngStream,
) -> Result<DatasetSplit> {
    ratios.validate()?;
    let mut shuffled = interactions.to_vec();
    stream.rng().shuffle(&mut shuffled);
    let (n_train, n_valid, _) = ratios.sizes(shuffled.len());
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        valid,
        test,
        cold_users: BTreeSet::new(),
        t: 0,
    })
}

/// One evaluated user's candidate list: positives first (in first-seen
/// order), then negatives in draw order, without duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub user: UserId,
    pub items: Vec<(ItemId, bool)>,
}

impl CandidateRow {
    pub fn positives(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.iter().filter(|(_, p)| *p).map(|(i, _)| *i)
    }

    pub fn n_positives(&self) -> usize {
        self.items.iter().filter(|(_, p)| *p).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCandidates {
    /// Rows in ascending user order.
    pub rows: Vec<CandidateRow>,
    pub warnings: Vec<String>,
}

impl EvalCandidates {
    /// Keep only rows of users in `users`.
    pub fn restrict(&self, users: &BTreeSet<UserId>) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .filter(|r| users.contains(&r.user))
                .cloned()
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.rows.iter().map(|r| r.user)
    }
}

fn build_candidates(
    positives: &[Interaction],
    rated: &BTreeMap<UserId, BTreeSet<ItemId>>,
    item_count: usize,
    n: usize,
    stream: &RngStream,
) -> EvalCandidates {
    let mut per_user: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
    for x in positives {
        let items = per_user.entry(x.user).or_default();
        if !items.contains(&x.item) {
            items.push(x.item);
        }
    }
    let mut rng = stream.rng();
    let mut out = EvalCandidates::default();
    for (user, pos) in per_user {
        let seen = &rated[&user];
        let unrated: Vec<ItemId> = (0..item_count)
            .map(ItemId::from_index)
            .filter(|i| !seen.contains(i))
            .collect();
        let take = n.min(unrated.len());
        if take < n {
            let msg = format!(
                "user {user}: only {} unrated items, wanted {n} negatives",
                unrated.len()
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
        let mut items: Vec<(ItemId, bool)> = pos.iter().map(|&i| (i, true)).collect();
        let mut drawn = BTreeSet::new();
        for _ in &pos {
            for k in rng.sample_indices(unrated.len(), take) {
                if drawn.insert(unrated[k]) {
                    items.push((unrated[k], false));
                }
            }
        }
        out.rows.push(CandidateRow { user, items });
    }
    out
}

/// Test candidates: for every test positive, `n` negatives drawn without
/// replacement from the user's unrated items (absent from all three parts).
pub fn sample_negatives(
    split: &DatasetSplit,
    item_count: usize,
    n: usize,
    stream: &RngStream,
) -> EvalCandidates {
    build_candidates(&split.test, &split.rated_items(), item_count, n, stream)
}

/// Same protocol with the validation interactions as positives; used for
/// early stopping and hyperparameter sweeps.
pub fn validation_candidates(
    split: &DatasetSplit,
    item_count: usize,
    n: usize,
    stream: &RngStream,
) -> EvalCandidates {
    build_candidates(&split.valid, &split.rated_items(), item_count, n, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColdStartConfig {
    pub fraction: f64,
    pub min_interactions: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub ratios: SplitRatios,
}

impl ColdStartConfig {
    pub fn new(t: usize) -> Self {
        Self {
            fraction: 0.1,
            min_interactions: 25,
            t,
            ratios: SplitRatios::default(),
        }
    }
}

/// Users with more than `min_interactions` interactions, ascending.
pub fn eligible_users(interactions: &[Interaction], min_interactions: usize) -> Vec<UserId> {
    let mut counts: BTreeMap<UserId, usize> = BTreeMap::new();
    for x in interactions {
        *counts.entry(x.user).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c > min_interactions)
        .map(|(u, _)| u)
        .collect()
}

/// Number of cold users drawn from `eligible` users: `round(fraction *
/// eligible)`, but at least one so the cold evaluation is never empty.
pub fn cold_user_count(fraction: f64, eligible: usize) -> usize {
    selection_count(fraction, eligible).max(1).min(eligible)
}

/// Cold-start split. Sampled cold users keep `t` uniformly chosen
/// interactions in train and all others in test; every other user's
/// interactions go through [`random_split`].
pub fn make_cold_start(
    interactions: &[Interaction],
    cfg: &ColdStartConfig,
    stream: &RngStream,
) -> Result<DatasetSplit> {
    if cfg.t == 0 {
        return Err(Error::InvalidArgument("cold-start T must be at least 1".into()));
    }
    if cfg.t > cfg.min_interactions {
        return Err(Error::InvalidArgument(format!(
            "cold-start T = {} exceeds the eligibility threshold {}",
            cfg.t, cfg.min_interactions
        )));
    }
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(Error::InvalidRatio(cfg.fraction));
    }
    let eligible = eligible_users(interactions, cfg.min_interactions);
    if eligible.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no user has more than {} interactions",
            cfg.min_interactions
        )));
    }
    let n_cold = cold_user_count(cfg.fraction, eligible.len());
    let cold_users: BTreeSet<UserId> = stream
        .child("users")
        .rng()
        .sample_indices(eligible.len(), n_cold)
        .into_iter()
        .map(|k| eligible[k])
        .collect();

    let mut per_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    let mut warm = Vec::new();
    for x in interactions {
        if cold_users.contains(&x.user) {
            per_user.entry(x.user).or_default().push(*x);
        } else {
            warm.push(*x);
        }
    }
    let mut split = random_split(&warm, cfg.ratios, &stream.child("warm"))?;
    let mut rng = stream.child("keep").rng();
    for rows in per_user.values() {
        let keep: BTreeSet<usize> = rng.sample_indices(rows.len(), cfg.t).into_iter().collect();
        for (k, x) in rows.iter().enumerate() {
            if keep.contains(&k) {
                split.train.push(*x);
            } else {
                split.test.push(*x);
            }
        }
    }
    split.cold_users = cold_users;
    split.t = cfg.t;
    Ok(split)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub stream: RngStream,
    pub stream_algorithm: String,
    pub ratios: SplitRatios,
    #[serde(rename = "T")]
    pub t: usize,
    pub cold_users: Vec<String>,
    pub sizes: [usize; 3],
}

/// Write `train.inter`, `valid.inter`, `test.inter` and `split.json` into `dir`.
pub fn write_split(
    dir: impl AsRef<Path>,
    ds: &InteractionDataset,
    split: &DatasetSplit,
    ratios: SplitRatios,
    stream: &RngStream,
) -> Result<()> {
    let dir = dir.as_ref();
    dataio::write_interactions(dir.join("train.inter"), ds, &split.train)?;
    dataio::write_interactions(dir.join("valid.inter"), ds, &split.valid)?;
    dataio::write_interactions(dir.join("test.inter"), ds, &split.test)?;
    let manifest = SplitManifest {
        stream: stream.clone(),
        stream_algorithm: STREAM_ALGORITHM.to_string(),
        ratios,
        t: split.t,
        cold_users: split
            .cold_users
            .iter()
            .map(|u| ds.user_labels[u.index()].clone())
            .collect(),
        sizes: [split.train.len(), split.valid.len(), split.test.len()],
    };
    let path = dir.join("split.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}
