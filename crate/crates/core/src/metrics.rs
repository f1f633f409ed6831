//! Ranking metrics over per-user candidate rankings, and the KG utilization
//! metrics KGER and KGUS.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{ItemId, UserId};

/// One user's ranked candidate list reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUser {
    pub user: UserId,
    /// `relevance[k]` is true iff the item at rank `k + 1` is a positive.
    pub relevance: Vec<bool>,
    /// `|R(u)|`.
    pub n_positives: usize,
}

impl RankedUser {
    pub fn new(user: UserId, ranked: &[ItemId], positives: &BTreeSet<ItemId>) -> Result<Self> {
        let relevance: Vec<bool> = ranked.iter().map(|i| positives.contains(i)).collect();
        if positives.is_empty() || !relevance.contains(&true) {
            return Err(Error::InvalidArgument(format!(
                "user {user}: no positive item in the ranked list"
            )));
        }
        Ok(Self {
            user,
            relevance,
            n_positives: positives.len(),
        })
    }

    /// 1-based rank of the first positive.
    pub fn first_rank(&self) -> usize {
        self.relevance.iter().position(|&r| r).expect("checked in new") + 1
    }

    fn hits_at(&self, k: usize) -> usize {
        self.relevance.iter().take(k).filter(|&&r| r).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub users: Vec<RankedUser>,
}

impl RankingResult {
    pub fn new(users: Vec<RankedUser>) -> Self {
        Self { users }
    }

    fn mean(&self, f: impl Fn(&RankedUser) -> f64) -> Result<f64> {
        if self.users.is_empty() {
            return Err(Error::InvalidArgument("no evaluated users".into()));
        }
        Ok(self.users.iter().map(f).sum::<f64>() / self.users.len() as f64)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("K must be at least 1".into()))
    } else {
        Ok(())
    }
}

pub fn mrr(results: &RankingResult) -> Result<f64> {
    results.mean(|u| 1.0 / u.first_rank() as f64)
}

pub fn hit_at_k(results: &RankingResult, k: usize) -> Result<f64> {
    check_k(k)?;
    results.mean(|u| if u.hits_at(k) > 0 { 1.0 } else { 0.0 })
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

pub fn ndcg_at_k(results: &RankingResult, k: usize) -> Result<f64> {
    check_k(k)?;
    results.mean(|u| {
        let dcg: f64 = u
            .relevance
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| discount(i + 1))
            .sum();
        let idcg: f64 = (1..=u.n_positives.min(k)).map(discount).sum();
        dcg / idcg
    })
}

pub fn precision_at_k(results: &RankingResult, k: usize) -> Result<f64> {
    check_k(k)?;
    results.mean(|u| u.hits_at(k) as f64 / k as f64)
}

pub fn recall_at_k(results: &RankingResult, k: usize) -> Result<f64> {
    check_k(k)?;
    results.mean(|u| u.hits_at(k) as f64 / u.n_positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricName {
    Mrr,
    Hit(usize),
    Ndcg(usize),
    Precision(usize),
    Recall(usize),
}

impl MetricName {
    /// MRR plus the four cut-off metrics at `k`.
    pub fn standard(k: usize) -> [MetricName; 5] {
        [
            Self::Mrr,
            Self::Hit(k),
            Self::Ndcg(k),
            Self::Precision(k),
            Self::Recall(k),
        ]
    }

    pub fn compute(self, results: &RankingResult) -> Result<f64> {
        match self {
            Self::Mrr => mrr(results),
            Self::Hit(k) => hit_at_k(results, k),
            Self::Ndcg(k) => ndcg_at_k(results, k),
            Self::Precision(k) => precision_at_k(results, k),
            Self::Recall(k) => recall_at_k(results, k),
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mrr => write!(f, "MRR"),
            Self::Hit(k) => write!(f, "Hit@{k}"),
            Self::Ndcg(k) => write!(f, "NDCG@{k}"),
            Self::Precision(k) => write!(f, "Precision@{k}"),
            Self::Recall(k) => write!(f, "Recall@{k}"),
        }
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "MRR" {
            return Ok(Self::Mrr);
        }
        let bad = || Error::InvalidArgument(format!("unknown metric `{s}`"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        match name {
            "Hit" => Ok(Self::Hit(k)),
            "NDCG" => Ok(Self::Ndcg(k)),
            "Precision" => Ok(Self::Precision(k)),
            "Recall" => Ok(Self::Recall(k)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: MetricName,
    pub value: f64,
}

pub fn evaluate(results: &RankingResult, k: usize) -> Result<Vec<MetricValue>> {
    MetricName::standard(k)
        .into_iter()
        .map(|name| Ok(MetricValue { name, value: name.compute(results)? }))
        .collect()
}

/// KG utilization efficiency: relative metric drop per unit of removed
/// knowledge, `(m_orig - m_pert) / (delta * m_orig)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn kger(m_orig: f64, m_pert: f64, delta: f64) -> Result<f64> {
    if !(m_orig > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kger: original metric must be positive, got {m_orig}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kger: delta must be in (0, 1], got {delta}"
        )));
    }
    Ok((m_orig - m_pert) / (delta * m_orig))
}

/// KG utilization score: `(m_orig - m_pert) / m_orig`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn kgus(m_orig: f64, m_pert: f64) -> Result<f64> {
    if !(m_orig > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kgus: original metric must be positive, got {m_orig}"
        )));
    }
    Ok((m_orig - m_pert) / m_orig)
}
