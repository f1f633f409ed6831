//! Experiment cells and everything derived from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{kger, kgus};

/// One measured value: `(suite, model, kind, ratio, T, repeat, metric)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub suite: String,
    pub model: String,
    pub kind: String,
    pub ratio: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub repeat: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub suite: String,
    pub model: String,
    pub kind: String,
    pub ratio: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// KGER or KGUS of one perturbation point against its ratio-0 baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilRow {
    pub suite: String,
    pub model: String,
    pub kind: String,
    pub ratio: f64,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: String,
    /// Mean over repeats of the per-repeat value.
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// The same formula applied to the repeat-averaged metrics.
    pub of_means: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub suite: String,
    pub model: String,
    pub kind: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub relation: String,
    pub n_facts: usize,
    pub mrr_original: f64,
    pub mrr_removed: f64,
    /// `mrr_removed - mrr_original`.
    pub delta: f64,
    pub sign: char,
}

/// Mean |KGER| of one of the four authenticity/amount regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeBar {
    pub regime: String,
    pub mean_abs_kger: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    pub kger: Vec<UtilRow>,
    pub kgus: Vec<UtilRow>,
    pub plots: Vec<PlotSeries>,
    #[serde(default)]
    pub ablation: Vec<AblationRow>,
    #[serde(default)]
    pub mean_abs_kger: Vec<RegimeBar>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Totally ordered key for grouping (ratios compared by bit pattern, which
/// is fine for the finite non-negative values used here).
type GroupKey = (String, String, String, u64, usize, String);

fn key(c: &Cell) -> GroupKey {
    (
        c.suite.clone(),
        c.model.clone(),
        c.kind.clone(),
        c.ratio.to_bits(),
        c.t,
        c.metric.clone(),
    )
}

impl ExperimentReport {
    /// Derive aggregates, KGER/KGUS tables and plot series from raw cells.
    ///
    /// Every cell with `ratio > 0` is compared with the ratio-0 cell of the
    /// same suite, model, T, repeat and metric; a missing baseline is an
    /// error. KGER uses `delta = ratio`.
    pub fn from_cells(cells: Vec<Cell>) -> Result<Self> {
        let mut groups: BTreeMap<GroupKey, Vec<(usize, f64)>> = BTreeMap::new();
        for c in &cells {
            groups.entry(key(c)).or_default().push((c.repeat, c.value));
        }
        let aggregates: Vec<Aggregate> = groups
            .iter()
            .map(|((suite, model, kind, ratio, t, metric), vals)| {
                let v: Vec<f64> = vals.iter().map(|x| x.1).collect();
                let (mean, std) = mean_std(&v);
                Aggregate {
                    suite: suite.clone(),
                    model: model.clone(),
                    kind: kind.clone(),
                    ratio: f64::from_bits(*ratio),
                    t: *t,
                    metric: metric.clone(),
                    mean,
                    std,
                    n: v.len(),
                }
            })
            .collect();

        // baseline per (suite, model, T, metric) -> repeat -> value
        let mut baselines: BTreeMap<(String, String, usize, String), BTreeMap<usize, f64>> = BTreeMap::new();
        for c in cells.iter().filter(|c| c.ratio == 0.0) {
            baselines
                .entry((c.suite.clone(), c.model.clone(), c.t, c.metric.clone()))
                .or_default()
                .insert(c.repeat, c.value);
        }
        let mut kger_rows = Vec::new();
        let mut kgus_rows = Vec::new();
        for ((suite, model, kind, ratio_bits, t, metric), vals) in &groups {
            let ratio = f64::from_bits(*ratio_bits);
            if ratio == 0.0 {
                continue;
            }
            let base = baselines
                .get(&(suite.clone(), model.clone(), *t, metric.clone()))
                .ok_or_else(|| {
                    Error::MissingCells(format!(
                        "no ratio-0 baseline for {suite}/{model}/{kind} T={t} {metric}"
                    ))
                })?;
            let mut per_kger = Vec::new();
            let mut per_kgus = Vec::new();
            let mut pert = Vec::new();
            let mut orig = Vec::new();
            for &(repeat, value) in vals {
                let b = *base.get(&repeat).ok_or_else(|| {
                    Error::MissingCells(format!(
                        "no ratio-0 baseline for {suite}/{model} T={t} repeat {repeat} {metric}"
                    ))
                })?;
                orig.push(b);
                pert.push(value);
                // a zero baseline metric has no defined relative drop
                if b > 0.0 {
                    per_kger.push(kger(b, value, ratio)?);
                    per_kgus.push(kgus(b, value)?);
                }
            }
            let (m_orig, _) = mean_std(&orig);
            let (m_pert, _) = mean_std(&pert);
            let row = |per: &[f64], of_means: f64| {
                let (mean, std) = if per.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    mean_std(per)
                };
                UtilRow {
                    suite: suite.clone(),
                    model: model.clone(),
                    kind: kind.clone(),
                    ratio,
                    t: *t,
                    metric: metric.clone(),
                    mean,
                    std,
                    n: per.len(),
                    of_means,
                }
            };
            let (km, gm) = if m_orig > 0.0 {
                (kger(m_orig, m_pert, ratio)?, kgus(m_orig, m_pert)?)
            } else {
                (f64::NAN, f64::NAN)
            };
            kger_rows.push(row(&per_kger, km));
            kgus_rows.push(row(&per_kgus, gm));
        }

        let plots = plot_series(&aggregates);
        Ok(Self {
            cells,
            aggregates,
            kger: kger_rows,
            kgus: kgus_rows,
            plots,
            ablation: Vec::new(),
            mean_abs_kger: Vec::new(),
        })
    }

    pub fn aggregate(&self, suite: &str, model: &str, kind: &str, ratio: f64, t: usize, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.suite == suite && a.model == model && a.kind == kind && a.ratio == ratio && a.t == t && a.metric == metric
        })
    }

    pub fn kger_row(&self, suite: &str, model: &str, kind: &str, ratio: f64, t: usize, metric: &str) -> Option<&UtilRow> {
        self.kger.iter().find(|a| {
            a.suite == suite && a.model == model && a.kind == kind && a.ratio == ratio && a.t == t && a.metric == metric
        })
    }
}

/// One series per (suite, model, kind, T, metric); the ratio-0 baseline
/// point is shared by every kind of its suite.
type SeriesKey = (String, String, String, usize, String);

fn plot_series(aggregates: &[Aggregate]) -> Vec<PlotSeries> {
    let mut series: BTreeMap<SeriesKey, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let baselines: Vec<&Aggregate> = aggregates.iter().filter(|a| a.ratio == 0.0).collect();
    for a in aggregates.iter().filter(|a| a.ratio > 0.0) {
        let s = series
            .entry((a.suite.clone(), a.model.clone(), a.kind.clone(), a.t, a.metric.clone()))
            .or_default();
        if s.is_empty() {
            if let Some(b) = baselines
                .iter()
                .find(|b| b.suite == a.suite && b.model == a.model && b.t == a.t && b.metric == a.metric)
            {
                s.push((0.0, b.mean, b.std));
            }
        }
        s.push((a.ratio, a.mean, a.std));
    }
    series
        .into_iter()
        .map(|((suite, model, kind, t, metric), mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            PlotSeries {
                suite,
                model,
                kind,
                t,
                metric,
                x: pts.iter().map(|p| p.0).collect(),
                y: pts.iter().map(|p| p.1).collect(),
                std: pts.iter().map(|p| p.2).collect(),
            }
        })
        .collect()
}

/// The four bars comparing false (F) and decreased (D) knowledge under the
/// normal and cold-start settings: mean |KGER| of MRR at `ratio`, one value
/// per model (averaged over repeats) and over the given T values.
pub fn mean_abs_kger(report: &ExperimentReport, ratio: f64, cold_t: &[usize]) -> Result<Vec<RegimeBar>> {
    let regimes: [(&str, &str, &str, bool); 4] = [
        ("normal-F", "rq2", "distort", false),
        ("normal-D", "rq3_facts", "delete_facts", false),
        ("cold-F", "rq4_false", "distort", true),
        ("cold-D", "rq4_decrease", "delete_facts", true),
    ];
    let models: BTreeSet<&str> = report.cells.iter().map(|c| c.model.as_str()).collect();
    let mut missing = Vec::new();
    let mut bars = Vec::new();
    for (name, suite, kind, cold) in regimes {
        let ts: Vec<usize> = if cold { cold_t.to_vec() } else { vec![0] };
        let mut vals = Vec::new();
        for &model in &models {
            for &t in &ts {
                match report.kger_row(suite, model, kind, ratio, t, "MRR") {
                    Some(r) if r.mean.is_finite() => vals.push(r.mean.abs()),
                    _ => missing.push(format!("{suite}/{model}/{kind} ratio={ratio} T={t}")),
                }
            }
        }
        let n = vals.len();
        bars.push(RegimeBar {
            regime: name.to_string(),
            mean_abs_kger: if n == 0 { f64::NAN } else { vals.iter().sum::<f64>() / n as f64 },
            n,
        });
    }
    if models.is_empty() {
        missing.push("no cells at all".to_string());
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing.join(", ")));
    }
    Ok(bars)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Vec<Cell>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let cells = r.deserialize().collect::<Result<Vec<Cell>, csv::Error>>()?;
    Ok(cells)
}

/// Write `raw.csv`, `agg.csv`, `kger.csv`, `kgus.csv`, `plots.json` and,
/// when present, `ablation.csv` and `mean_abs_kger.json` into `dir`.
/// The replay manifest is written by the runner.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if report.cells.is_empty() {
        return Err(Error::InvalidArgument("refusing to emit an empty report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("raw.csv"), &report.cells)?;
    write_csv(&dir.join("agg.csv"), &report.aggregates)?;
    write_csv(&dir.join("kger.csv"), &report.kger)?;
    write_csv(&dir.join("kgus.csv"), &report.kgus)?;
    let plots = serde_json::json!({ "series": report.plots });
    let path = dir.join("plots.json");
    fs::write(&path, serde_json::to_string_pretty(&plots)?).map_err(|e| Error::io(&path, e))?;
    if !report.ablation.is_empty() {
        write_csv(&dir.join("ablation.csv"), &report.ablation)?;
    }
    if !report.mean_abs_kger.is_empty() {
        let path = dir.join("mean_abs_kger.json");
        fs::write(&path, serde_json::to_string_pretty(&report.mean_abs_kger)?)
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
