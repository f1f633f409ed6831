use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kg_utilization::dataio::{self, Bundle};
use kg_utilization::models::{self, checkpoint, ModelConfig, ModelKind, TrainInput};
use kg_utilization::perturb::{self, PerturbKind, PerturbManifest, PerturbSpec};
use kg_utilization::runner::{self, report, ExperimentConfig, ExperimentReport};
use kg_utilization::split::{SplitRatios, DEFAULT_NEGATIVES};
use kg_utilization::{metrics, Error, Result, RngStream};

#[derive(Parser)]
#[command(name = "kgu", version, about = "Perturb the KG behind a recommender and measure how much it is used")]
struct Cli {
    /// Master seed (overrides the config file's seed for `experiment`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Data {
    #[arg(long)]
    inter: PathBuf,
    #[arg(long)]
    kg: PathBuf,
    #[arg(long)]
    link: PathBuf,
}

impl Data {
    fn load(&self) -> Result<Bundle> {
        Bundle::load(&self.inter, &self.kg, &self.link)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Filter a dataset and write it back with its statistics.
    Preprocess {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        rating_threshold: Option<f64>,
        #[arg(long)]
        k_core: Option<usize>,
    },
    /// Write one perturbed KG plus a manifest.
    Perturb {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        kind: PerturbKind,
        #[arg(long)]
        ratio: Option<f64>,
        /// Relation label, for remove_relation_type.
        #[arg(long)]
        relation: Option<String>,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Skip the self-loop placeholders on linked items.
        #[arg(long)]
        no_placeholders: bool,
    },
    /// Train one model and save a checkpoint.
    Train {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        model: ModelKind,
        /// TOML file with model hyperparameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Evaluate a checkpoint on the test split of the same seed and repeat.
    Eval {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Run a full suite from a TOML or JSON config (or a replay manifest).
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild report tables from one or more raw.csv files.
    Report {
        #[arg(long = "raw", required = true)]
        raw: Vec<PathBuf>,
        /// T values used for the cold-start bars.
        #[arg(long = "cold-t", default_values_t = [3])]
        cold_t: Vec<usize>,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn model_params(path: Option<&Path>) -> Result<ModelConfig> {
    let Some(path) = path else {
        return Ok(ModelConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let cfg: ModelConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_path();
    match cli.command {
        Command::Preprocess {
            data,
            rating_threshold,
            k_core,
        } => {
            let mut bundle = data.load()?;
            if let Some(t) = rating_threshold {
                bundle = bundle.map_dataset(|d| dataio::filter_by_rating(d, t))?;
            }
            if let Some(k) = k_core {
                bundle = bundle.map_dataset(|d| Ok(dataio::k_core_filter(d, k)))?;
            }
            let ds = &bundle.dataset;
            dataio::write_interactions(out.join("dataset.inter"), ds, &ds.interactions)?;
            dataio::write_kg(out.join("dataset.kg"), &bundle.kg)?;
            dataio::write_links(out.join("dataset.link"), ds, &bundle.kg)?;
            let stats = serde_json::json!({
                "interactions": dataio::dataset_stats(ds)?,
                "kg": bundle.kg.stats(),
                "unlinked_items": bundle.flagged_items.len(),
            });
            write_json(&out.join("stats.json"), &stats)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Perturb {
            data,
            kind,
            ratio,
            relation,
            repeat,
            no_placeholders,
        } => {
            let bundle = data.load()?;
            let ds = &bundle.dataset;
            let original = runner::original_graph(&bundle, !no_placeholders)?;
            let stream = RngStream::new(seed, format!("perturb/{kind}/{}", ratio.unwrap_or(0.0)), repeat as u64);
            let (spec, kg, links, stream) = match kind {
                PerturbKind::InteractionKg | PerturbKind::SelfKg => {
                    let g = if kind == PerturbKind::SelfKg {
                        perturb::to_self_kg(ds, &bundle.kg)?
                    } else {
                        let s = runner::split_for_repeat(ds, seed, SplitRatios::default(), None, 1, repeat)?;
                        perturb::to_interaction_kg(&s.split.train, ds, &bundle.kg)?
                    };
                    (PerturbSpec::regime(kind)?, g.kg, Some(g.links), None)
                }
                PerturbKind::RemoveRelationType => {
                    let label = relation
                        .ok_or_else(|| Error::InvalidArgument("--relation is required".into()))?;
                    let r = original
                        .relation_by_label(&label)
                        .ok_or_else(|| Error::InvalidArgument(format!("no relation `{label}`")))?;
                    let spec = PerturbSpec::remove_relation(r);
                    let kg = spec.apply(&original, &stream)?;
                    (spec, kg, None, None)
                }
                _ => {
                    let ratio = ratio.ok_or_else(|| Error::InvalidArgument("--ratio is required".into()))?;
                    let spec = PerturbSpec::ratio(kind, ratio)?;
                    let kg = spec.apply(&original, &stream)?;
                    (spec, kg, None, Some(stream))
                }
            };
            create_dir(out)?;
            let stem = kind.as_str();
            let manifest = PerturbManifest::new(spec, stream, data.kg.display().to_string(), &original, &kg);
            perturb::write_perturbed(out, stem, &kg, &manifest)?;
            if let Some(links) = links {
                let mut relinked = ds.clone();
                relinked.links = links;
                dataio::write_links(out.join(format!("{stem}.link")), &relinked, &kg)?;
            }
            println!(
                "{stem}: {} -> {} facts",
                manifest.n_facts_before, manifest.n_facts_after
            );
        }
        Command::Train {
            data,
            model,
            params,
            repeat,
        } => {
            let cfg = model_params(params.as_deref())?;
            let bundle = data.load()?;
            let original = runner::original_graph(&bundle, true)?;
            let ds = &bundle.dataset;
            let s = runner::split_for_repeat(ds, seed, SplitRatios::default(), None, DEFAULT_NEGATIVES, repeat)?;
            let input = TrainInput {
                dataset: ds,
                split: &s.split,
                valid: &s.valid,
                graph: Some((&original, &ds.links)),
            };
            let trained = models::train(model, &input, &cfg, &runner::train_stream(seed, model, 0, repeat))?;
            create_dir(out)?;
            checkpoint::save(&trained, out.join("model.ckpt"))?;
            write_json(&out.join("train_log.json"), &trained.log)?;
            println!(
                "{model}: best epoch {} of {}, valid MRR {:.4}",
                trained.best_epoch,
                trained.log.len() - 1,
                trained.best_valid_mrr()
            );
        }
        Command::Eval {
            data,
            checkpoint: path,
            k,
            repeat,
        } => {
            let trained = checkpoint::load(&path)?;
            let bundle = data.load()?;
            let s = runner::split_for_repeat(
                &bundle.dataset,
                seed,
                SplitRatios::default(),
                None,
                DEFAULT_NEGATIVES,
                repeat,
            )?;
            let result = trained.evaluate(&s.test)?;
            let values = metrics::evaluate(&result, k)?;
            let table: serde_json::Map<String, serde_json::Value> = values
                .iter()
                .map(|m| (m.name.to_string(), m.value.into()))
                .collect();
            create_dir(out)?;
            write_json(&out.join("metrics.json"), &table)?;
            for m in values {
                println!("{:<14}{:.4}", m.name.to_string(), m.value);
            }
        }
        Command::Experiment { config } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = runner::run_and_emit(&cfg, out, cli.jobs)?;
            print_summary(&report);
            println!("wrote {}", out.display());
        }
        Command::Report { raw, cold_t } => {
            let mut cells = Vec::new();
            for p in &raw {
                cells.extend(report::read_raw(p)?);
            }
            let mut rep = ExperimentReport::from_cells(cells)?;
            let suites: BTreeSet<&str> = rep.cells.iter().map(|c| c.suite.as_str()).collect();
            if ["rq2", "rq3_facts", "rq4_false", "rq4_decrease"].iter().all(|s| suites.contains(s)) {
                rep.mean_abs_kger = runner::mean_abs_kger(&rep, runner::RQ5_RATIO, &cold_t)?;
            }
            runner::emit_report(&rep, out)?;
            print_summary(&rep);
        }
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport) {
    for row in report.kger.iter().filter(|r| r.metric == "MRR") {
        println!(
            "{:<18}{:<11}{:<22}ratio {:<5} T {:<3} KGER {:>8.4} ± {:.4}",
            row.suite, row.model, row.kind, row.ratio, row.t, row.mean, row.std
        );
    }
    for b in &report.mean_abs_kger {
        println!("{:<10} mean |KGER| {:.4}", b.regime, b.mean_abs_kger);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
