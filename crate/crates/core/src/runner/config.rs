//! Experiment configuration, read from TOML or JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};
use crate::split::{SplitRatios, DEFAULT_NEGATIVES};
use crate::synthetic::{KgSignal, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Original vs Interaction KG vs Self KG.
    Rq1,
    /// Random distortion at every ratio.
    Rq2,
    Rq3Facts,
    Rq3Entities,
    Rq3Relations,
    /// Distortion under the cold-start split, per T.
    Rq4False,
    /// Fact deletion under the cold-start split, per T.
    Rq4Decrease,
    /// rq2, rq3_facts, rq4_false and rq4_decrease plus the mean |KGER| bars.
    Rq5,
    /// Drop each of the most frequent relation types in turn.
    RelationAblation,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Self::Rq1,
        Self::Rq2,
        Self::Rq3Facts,
        Self::Rq3Entities,
        Self::Rq3Relations,
        Self::Rq4False,
        Self::Rq4Decrease,
        Self::Rq5,
        Self::RelationAblation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rq1 => "rq1",
            Self::Rq2 => "rq2",
            Self::Rq3Facts => "rq3_facts",
            Self::Rq3Entities => "rq3_entities",
            Self::Rq3Relations => "rq3_relations",
            Self::Rq4False => "rq4_false",
            Self::Rq4Decrease => "rq4_decrease",
            Self::Rq5 => "rq5",
            Self::RelationAblation => "relation_ablation",
        }
    }

    pub fn is_cold(self) -> bool {
        matches!(self, Self::Rq4False | Self::Rq4Decrease)
    }

    /// Suites whose cells are actually produced when running `self`.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Self::Rq5 => vec![Self::Rq2, Self::Rq3Facts, Self::Rq4False, Self::Rq4Decrease],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub signal: KgSignal,
    #[serde(default)]
    pub config: SyntheticConfig,
}

/// Either the three atomic files or a generated dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    /// Keep interactions rated at least this much (explicit-feedback data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_core: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: OneOrMany<ModelKind>,
    #[serde(default)]
    pub params: ModelConfig,
    /// Partial overrides of `params`; empty means no sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<serde_json::Map<String, serde_json::Value>>,
}

impl ModelSection {
    pub fn kinds(&self) -> Vec<ModelKind> {
        self.kind.to_vec()
    }

    /// `params` with each grid point applied, in grid order.
    pub fn grid_configs(&self) -> Result<Vec<ModelConfig>> {
        let base = serde_json::to_value(self.params)?;
        self.grid
            .iter()
            .map(|point| {
                let mut v = base.clone();
                let obj = v.as_object_mut().expect("struct serializes to an object");
                for (k, x) in point {
                    obj.insert(k.clone(), x.clone());
                }
                let cfg: ModelConfig = serde_json::from_value(v)
                    .map_err(|e| Error::Config(format!("model.grid: {e}")))?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

fn default_t() -> Vec<usize> {
    vec![3]
}

fn default_fraction() -> f64 {
    0.1
}

fn default_min_interactions() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColdSection {
    #[serde(rename = "T", default = "default_t")]
    pub t: Vec<usize>,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_min_interactions")]
    pub min_interactions: usize,
}

impl Default for ColdSection {
    fn default() -> Self {
        Self {
            t: default_t(),
            fraction: default_fraction(),
            min_interactions: default_min_interactions(),
        }
    }
}

fn default_ratios() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_repeats() -> usize {
    5
}

fn default_k() -> usize {
    10
}

fn default_negatives() -> usize {
    DEFAULT_NEGATIVES
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    /// Re-run the sweep at every perturbation point instead of once.
    #[serde(default)]
    pub retune: bool,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub cold: ColdSection,
    /// Cutoff for Hit/NDCG/Precision/Recall.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Sampled negatives per positive in the candidate lists.
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    /// Give every linked item a self-loop placeholder in the Original KG.
    #[serde(default = "yes")]
    pub placeholders: bool,
    /// Filled in by the runner when writing `manifest.json`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ExperimentConfig {
    /// Parse by extension: `.json` is JSON, anything else TOML. Relative
    /// dataset paths are resolved against the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = &self.dataset;
        let files = [&d.inter, &d.kg, &d.link].iter().filter(|p| p.is_some()).count();
        match (files, &d.synthetic) {
            (0, Some(_)) | (3, None) => {}
            _ => return bad("dataset: give either inter, kg and link, or synthetic".into()),
        }
        if self.model.kinds().is_empty() {
            return bad("model.kind is empty".into());
        }
        self.model.params.validate()?;
        self.model.grid_configs()?;
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidRatio(*r));
        }
        if !self.ratios.windows(2).all(|w| w[0] < w[1]) {
            return bad("ratios must be strictly increasing".into());
        }
        if self.ratios.first() != Some(&0.0) {
            return bad("ratios must contain 0 (the baseline)".into());
        }
        if self.suite == Suite::Rq5 && !self.ratios.contains(&0.5) {
            return bad("rq5 compares KGER at ratio 0.5, which must be listed in ratios".into());
        }
        if self.k == 0 || self.negatives == 0 {
            return bad("k and negatives must be positive".into());
        }
        self.split.validate()?;
        if self.suite.expand().iter().any(|s| s.is_cold()) {
            if self.cold.t.is_empty() {
                return bad("cold.T is empty".into());
            }
            if let Some(t) = self.cold.t.iter().find(|&&t| t == 0 || t > self.cold.min_interactions) {
                return bad(format!(
                    "cold.T = {t} must be in 1..={}",
                    self.cold.min_interactions
                ));
            }
            if !(0.0..=1.0).contains(&self.cold.fraction) {
                return Err(Error::InvalidRatio(self.cold.fraction));
            }
        }
        Ok(())
    }
}

impl DatasetSection {
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.inter, &mut self.kg, &mut self.link].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if let Ok(abs) = std::path::absolute(&*p) {
                *p = abs;
            }
        }
    }
}
