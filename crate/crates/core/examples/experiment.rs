//! Run a small suite from an inline config and write the report files.
//!
//! cargo run --release --example experiment -- [suite] [out_dir]

use std::path::PathBuf;

use kg_utilization::runner::{run_and_emit, ExperimentConfig};

fn main() -> kg_utilization::Result<()> {
    let mut args = std::env::args().skip(1);
    let suite = args.next().unwrap_or_else(|| "rq1".into());
    let out: PathBuf = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("kgu-{suite}")));
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
        suite = "{suite}"
        ratios = [0.0, 0.5, 1.0]
        repeats = 3
        seed = 11

        [dataset.synthetic]
        signal = "planted"
        config = {{ interactions_per_user = 30 }}

        [model]
        kind = ["bpr_mf", "cfkg_lite", "kgcn_lite"]
        params = {{ max_epochs = 40, patience = 15 }}
        "#
    ))?;
    let report = run_and_emit(&cfg, &out, 0)?;
    for row in report.kger.iter().filter(|r| r.metric == "MRR") {
        println!(
            "{:<14} {:<10} {:<16} ratio {:<4} T {}  KGER {:+.3} ± {:.3}",
            row.suite, row.model, row.kind, row.ratio, row.t, row.mean, row.std
        );
    }
    for a in &report.ablation {
        println!("{:<10} without {:<8} MRR {:+.4} ({})", a.model, a.relation, a.delta, a.sign);
    }
    for bar in &report.mean_abs_kger {
        println!("{:<9} mean |KGER| {:.3}", bar.regime, bar.mean_abs_kger);
    }
    println!("wrote {}", out.display());
    Ok(())
}
