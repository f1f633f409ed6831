//! Measure how much a knowledge-graph-aware recommender actually relies on
//! its knowledge graph.
//!
//! The workflow: load interactions, a KG and item links ([`dataio`]); derive
//! perturbed graphs ([`perturb`]); split interactions, optionally into a
//! cold-start setting ([`split`]); train a recommender on each graph
//! ([`models`]); rank sampled candidates and compare the metrics against
//! the unperturbed run ([`metrics`]). [`runner`] drives whole suites of
//! such runs from a config file and writes CSV/JSON reports.
//!
//! ```no_run
//! use kg_utilization::runner::{run_and_emit, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::from_file("experiment.toml")?;
//! let report = run_and_emit(&cfg, "out", 0)?;
//! for row in &report.kger {
//!     println!("{} {} {} {:.3}", row.model, row.kind, row.ratio, row.mean);
//! }
//! # Ok::<(), kg_utilization::Error>(())
//! ```

pub mod dataio;
pub mod error;
pub mod kg;
pub mod metrics;
pub mod models;
pub mod perturb;
pub mod rng;
pub mod runner;
pub mod split;
pub mod synthetic;

pub use dataio::{Bundle, Interaction, InteractionDataset, LinkTable};
pub use error::{Error, Result};
pub use kg::{EntityId, Fact, ItemId, KnowledgeGraph, RelationId, UserId};
pub use metrics::{kger, kgus, MetricName};
pub use models::{ModelConfig, ModelKind, TrainedModel};
pub use perturb::{PerturbKind, PerturbSpec};
pub use rng::RngStream;
