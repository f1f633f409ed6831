//! Experiment suites: build every (model, KG variant, ratio, T, repeat)
//! cell, train and evaluate it, and turn the cells into report tables.
//!
//! Every random decision draws from an [`RngStream`] whose tag names its
//! purpose, so a cell's value depends only on the master seed and its own
//! coordinates. Adding a ratio or a model never changes other cells, and
//! the thread count never changes anything.

pub mod config;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Suite};
pub use report::{emit_report, mean_abs_kger, read_raw, Cell, ExperimentReport};

use crate::dataio::{filter_by_rating, k_core_filter, Bundle, InteractionDataset, LinkTable};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId};
use crate::metrics::{self, MetricName};
use crate::models::{self, ModelConfig, ModelKind, TrainInput};
use crate::perturb::{self, PerturbKind};
use crate::rng::{RngStream, STREAM_ALGORITHM};
use crate::split::{self, ColdStartConfig, DatasetSplit, EvalCandidates, SplitRatios};
use crate::synthetic;

/// Relations dropped one at a time by the ablation suite.
pub const ABLATION_TOP_RELATIONS: usize = 5;

/// Ratio at which the rq5 bars compare false and decreased knowledge.
pub const RQ5_RATIO: f64 = 0.5;

/// Load the configured dataset. Synthetic data is drawn from the master
/// seed alone, so it is the same for every repeat.
pub fn load_dataset(cfg: &config::DatasetSection, seed: u64) -> Result<Bundle> {
    let bundle = match (&cfg.synthetic, &cfg.inter, &cfg.kg, &cfg.link) {
        (Some(s), ..) => synthetic::generate(&s.config, s.signal, &RngStream::new(seed, "data", 0))?,
        (None, Some(i), Some(k), Some(l)) => Bundle::load(i, k, l)?,
        _ => return Err(Error::Config("dataset: incomplete file triple".into())),
    };
    let bundle = match cfg.rating_threshold {
        Some(t) => bundle.map_dataset(|d| filter_by_rating(d, t))?,
        None => bundle,
    };
    match cfg.k_core {
        Some(k) => bundle.map_dataset(|d| Ok(k_core_filter(d, k))),
        None => Ok(bundle),
    }
}

/// The KG every suite perturbs: the loaded graph, with a self-loop
/// placeholder on each linked item when requested.
pub fn original_graph(bundle: &Bundle, placeholders: bool) -> Result<KnowledgeGraph> {
    if !placeholders {
        return Ok(bundle.kg.clone());
    }
    let linked: BTreeSet<EntityId> = bundle.dataset.links.iter().map(|(_, e)| e).collect();
    perturb::add_self_loop_placeholders(&bundle.kg, &linked)
}

/// The most frequent non-placeholder relations, most frequent first (ties
/// by id), with their fact counts.
pub fn top_relations(kg: &KnowledgeGraph, n: usize) -> Vec<(RelationId, usize)> {
    let hist = kg.relation_histogram();
    let mut rels: Vec<(RelationId, usize)> = hist
        .into_iter()
        .enumerate()
        .map(|(r, c)| (RelationId::from_index(r), c))
        .filter(|&(r, c)| c > 0 && Some(r) != kg.placeholder_relation())
        .collect();
    rels.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    rels.truncate(n);
    rels
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: ModelConfig,
    pub best_index: usize,
    /// Best validation MRR of each grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Train every grid point and keep the one with the highest validation MRR.
/// Ties (and NaN scores) go to the earlier grid point. Every point trains
/// from the same stream.
pub fn sweep_hyperparameters(
    kind: ModelKind,
    input: &TrainInput<'_>,
    grid: &[ModelConfig],
    stream: &RngStream,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let scores = grid
        .iter()
        .map(|cfg| Ok(models::train(kind, input, cfg, stream)?.best_valid_mrr()))
        .collect::<Result<Vec<f64>>>()?;
    let mut best_index = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s > scores[best_index] || (scores[best_index].is_nan() && !s.is_nan()) {
            best_index = k;
        }
    }
    Ok(SweepResult {
        best: grid[best_index],
        best_index,
        scores,
    })
}

/// Which graph a cell trains on.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphVariant {
    Original,
    InteractionKg,
    SelfKg,
    Perturbed(PerturbKind, f64),
    WithoutRelation(RelationId),
}

/// Coordinates of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub suite: Suite,
    pub model: ModelKind,
    pub kind: String,
    pub graph: GraphVariant,
    pub ratio: f64,
    pub t: usize,
    pub repeat: usize,
}

fn suite_kind(suite: Suite) -> Option<PerturbKind> {
    match suite {
        Suite::Rq2 | Suite::Rq4False => Some(PerturbKind::Distort),
        Suite::Rq3Facts | Suite::Rq4Decrease => Some(PerturbKind::DeleteFacts),
        Suite::Rq3Entities => Some(PerturbKind::DeleteEntities),
        Suite::Rq3Relations => Some(PerturbKind::DeleteRelations),
        _ => None,
    }
}

/// Every cell of the configured suite, in report order.
pub fn plan(cfg: &ExperimentConfig, original: &KnowledgeGraph) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for suite in cfg.suite.expand() {
        for model in cfg.model.kinds() {
            let mut push = |kind: &str, graph: GraphVariant, ratio: f64, t: usize| {
                for repeat in 0..cfg.repeats {
                    out.push(CellSpec {
                        suite,
                        model,
                        kind: kind.to_string(),
                        graph: graph.clone(),
                        ratio,
                        t,
                        repeat,
                    });
                }
            };
            match suite {
                Suite::Rq1 => {
                    push("original", GraphVariant::Original, 0.0, 0);
                    push(PerturbKind::InteractionKg.as_str(), GraphVariant::InteractionKg, 1.0, 0);
                    push(PerturbKind::SelfKg.as_str(), GraphVariant::SelfKg, 1.0, 0);
                }
                Suite::RelationAblation => {
                    push("original", GraphVariant::Original, 0.0, 0);
                    for (r, _) in top_relations(original, ABLATION_TOP_RELATIONS) {
                        let kind = format!("without:{}", original.relation_label(r));
                        push(&kind, GraphVariant::WithoutRelation(r), 1.0, 0);
                    }
                }
                Suite::Rq5 => unreachable!("expanded"),
                _ => {
                    let kind = suite_kind(suite).expect("ratio suite");
                    let ts = if suite.is_cold() { cfg.cold.t.clone() } else { vec![0] };
                    for t in ts {
                        for &ratio in &cfg.ratios {
                            let graph = if ratio == 0.0 {
                                GraphVariant::Original
                            } else {
                                GraphVariant::Perturbed(kind, ratio)
                            };
                            push(kind.as_str(), graph, ratio, t);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Data shared by all cells of one experiment.
pub struct Prepared {
    pub bundle: Bundle,
    pub original: KnowledgeGraph,
}

/// One repeat's split with its validation and test candidates.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub split: DatasetSplit,
    pub valid: EvalCandidates,
    /// Restricted to the cold users under a cold-start split.
    pub test: EvalCandidates,
}

/// The split used by every cell at repeat `repeat`: a random split, or a
/// cold-start split when `cold` is given.
pub fn split_for_repeat(
    ds: &InteractionDataset,
    seed: u64,
    ratios: SplitRatios,
    cold: Option<ColdStartConfig>,
    negatives: usize,
    repeat: usize,
) -> Result<SplitData> {
    let (split, stream) = match cold {
        None => {
            let stream = RngStream::new(seed, "split", repeat as u64);
            (split::random_split(&ds.interactions, ratios, &stream)?, stream)
        }
        Some(c) => {
            let stream = RngStream::new(seed, format!("cold/T{}", c.t), repeat as u64);
            (split::make_cold_start(&ds.interactions, &c, &stream)?, stream)
        }
    };
    let n_items = ds.item_count();
    let valid = split::validation_candidates(&split, n_items, negatives, &stream.child("valid"));
    let mut test = split::sample_negatives(&split, n_items, negatives, &stream.child("test"));
    if cold.is_some() {
        test = test.restrict(&split.cold_users);
    }
    for w in valid.warnings.iter().chain(&test.warnings) {
        log::warn!("{w}");
    }
    Ok(SplitData { split, valid, test })
}

fn make_split(cfg: &ExperimentConfig, p: &Prepared, t: usize, repeat: usize) -> Result<SplitData> {
    let cold = (t > 0).then_some(ColdStartConfig {
        fraction: cfg.cold.fraction,
        min_interactions: cfg.cold.min_interactions,
        t,
        ratios: cfg.split,
    });
    split_for_repeat(&p.bundle.dataset, cfg.seed, cfg.split, cold, cfg.negatives, repeat)
}

fn variant_graph(
    p: &Prepared,
    split: &DatasetSplit,
    graph: &GraphVariant,
    seed: u64,
    repeat: usize,
) -> Result<(KnowledgeGraph, LinkTable)> {
    let ds = &p.bundle.dataset;
    Ok(match graph {
        GraphVariant::Original => (p.original.clone(), ds.links.clone()),
        GraphVariant::InteractionKg => {
            let g = perturb::to_interaction_kg(&split.train, ds, &p.bundle.kg)?;
            (g.kg, g.links)
        }
        GraphVariant::SelfKg => {
            let g = perturb::to_self_kg(ds, &p.bundle.kg)?;
            (g.kg, g.links)
        }
        GraphVariant::Perturbed(kind, ratio) => {
            let stream = RngStream::new(seed, format!("perturb/{kind}/{ratio}"), repeat as u64);
            let spec = perturb::PerturbSpec::ratio(*kind, *ratio)?;
            (spec.apply(&p.original, &stream)?, ds.links.clone())
        }
        GraphVariant::WithoutRelation(r) => (perturb::remove_relation_type(&p.original, *r)?, ds.links.clone()),
    })
}

/// Training stream of `model` at repeat `repeat`; shared by all KG
/// variants so that their comparison is paired.
pub fn train_stream(seed: u64, model: ModelKind, t: usize, repeat: usize) -> RngStream {
    RngStream::new(seed, format!("train/{model}/T{t}"), repeat as u64)
}

fn run_cell(
    cfg: &ExperimentConfig,
    p: &Prepared,
    tuned: &BTreeMap<ModelKind, ModelConfig>,
    cell: &CellSpec,
) -> Result<Vec<Cell>> {
    let data = make_split(cfg, p, cell.t, cell.repeat)?;
    let (kg, links) = variant_graph(p, &data.split, &cell.graph, cfg.seed, cell.repeat)?;
    let input = TrainInput {
        dataset: &p.bundle.dataset,
        split: &data.split,
        valid: &data.valid,
        graph: Some((&kg, &links)),
    };
    let stream = train_stream(cfg.seed, cell.model, cell.t, cell.repeat);
    let model_cfg = if cfg.retune && !cfg.model.grid.is_empty() {
        sweep_hyperparameters(cell.model, &input, &cfg.model.grid_configs()?, &stream.child("sweep"))?.best
    } else {
        tuned[&cell.model]
    };
    let model = models::train(cell.model, &input, &model_cfg, &stream)?;
    if data.test.rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} {} T={} repeat {}: no test users",
            cell.suite, cell.kind, cell.t, cell.repeat
        )));
    }
    let result = model.evaluate(&data.test)?;
    metrics::evaluate(&result, cfg.k)?
        .into_iter()
        .map(|m| {
            Ok(Cell {
                suite: cell.suite.to_string(),
                model: cell.model.to_string(),
                kind: cell.kind.clone(),
                ratio: cell.ratio,
                t: cell.t,
                repeat: cell.repeat,
                metric: m.name.to_string(),
                value: m.value,
            })
        })
        .collect()
}

/// One configuration per model, reused at every perturbation point: the
/// grid winner on the unperturbed graph and the first repeat's split, or
/// `model.params` when there is no grid.
fn tune_once(cfg: &ExperimentConfig, p: &Prepared) -> Result<BTreeMap<ModelKind, ModelConfig>> {
    let grid = cfg.model.grid_configs()?;
    let mut out = BTreeMap::new();
    for model in cfg.model.kinds() {
        let chosen = if grid.is_empty() || cfg.retune {
            cfg.model.params
        } else {
            let data = make_split(cfg, p, 0, 0)?;
            let input = TrainInput {
                dataset: &p.bundle.dataset,
                split: &data.split,
                valid: &data.valid,
                graph: Some((&p.original, &p.bundle.dataset.links)),
            };
            let stream = train_stream(cfg.seed, model, 0, 0).child("sweep");
            let sweep = sweep_hyperparameters(model, &input, &grid, &stream)?;
            log::info!("{model}: grid point {} selected ({:?})", sweep.best_index, sweep.scores);
            sweep.best
        };
        out.insert(model, chosen);
    }
    Ok(out)
}

/// Run every cell on a pool of `jobs` threads (0 = one per core).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let bundle = load_dataset(&cfg.dataset, cfg.seed)?;
    let original = original_graph(&bundle, cfg.placeholders)?;
    let p = Prepared { bundle, original };
    let cells = plan(cfg, &p.original);
    log::info!("{}: {} training runs", cfg.suite, cells.len());
    let tuned = tune_once(cfg, &p)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let values: Vec<Vec<Cell>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(cfg, &p, &tuned, c))
            .collect::<Result<_>>()
    })?;
    let mut report = ExperimentReport::from_cells(values.into_iter().flatten().collect())?;
    if cfg.suite == Suite::RelationAblation {
        report.ablation = ablation_rows(&report, &p.original);
    }
    if cfg.suite == Suite::Rq5 {
        report.mean_abs_kger = mean_abs_kger(&report, RQ5_RATIO, &cfg.cold.t)?;
    }
    Ok(report)
}

fn ablation_rows(report: &ExperimentReport, original: &KnowledgeGraph) -> Vec<report::AblationRow> {
    let suite = Suite::RelationAblation.as_str();
    let mrr = MetricName::Mrr.to_string();
    let mut rows = Vec::new();
    let models: BTreeSet<&str> = report.cells.iter().map(|c| c.model.as_str()).collect();
    for model in models {
        let Some(base) = report.aggregate(suite, model, "original", 0.0, 0, &mrr) else {
            continue;
        };
        for (r, n_facts) in top_relations(original, ABLATION_TOP_RELATIONS) {
            let relation = original.relation_label(r).to_string();
            let kind = format!("without:{relation}");
            if let Some(a) = report.aggregate(suite, model, &kind, 1.0, 0, &mrr) {
                let delta = a.mean - base.mean;
                rows.push(report::AblationRow {
                    model: model.to_string(),
                    relation,
                    n_facts,
                    mrr_original: base.mean,
                    mrr_removed: a.mean,
                    delta,
                    sign: if delta >= 0.0 { '+' } else { '-' },
                });
            }
        }
    }
    rows
}

/// The effective configuration plus what is needed to audit a replay.
/// `kgu experiment --config manifest.json` reruns the experiment.
pub fn manifest(cfg: &ExperimentConfig, report: &ExperimentReport) -> ExperimentConfig {
    let mut m = cfg.clone();
    m.provenance = Some(serde_json::json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "stream_algorithm": STREAM_ALGORITHM,
        "cells": report.cells.len(),
    }));
    m
}

/// Run, then write the report files and `manifest.json` into `out`.
pub fn run_and_emit(cfg: &ExperimentConfig, out: impl AsRef<Path>, jobs: usize) -> Result<ExperimentReport> {
    let out = out.as_ref();
    let report = run_experiment(cfg, jobs)?;
    emit_report(&report, out)?;
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest(cfg, &report))?)
        .map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
