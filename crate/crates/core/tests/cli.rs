use std::path::Path;
use std::process::Command;

use kg_utilization::dataio::{write_interactions, write_kg, write_links};
use kg_utilization::synthetic::{generate, KgSignal, SyntheticConfig};
use kg_utilization::RngStream;

fn kgu(args: &[&str], dir: &Path) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_kgu"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "kgu {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_dataset(dir: &Path) {
    let cfg = SyntheticConfig {
        n_users: 40,
        n_items: 40,
        interactions_per_user: 8,
        groups_per_block: 2,
        ..Default::default()
    };
    let b = generate(&cfg, KgSignal::Planted, &RngStream::new(3, "data", 0)).unwrap();
    write_interactions(dir.join("d.inter"), &b.dataset, &b.dataset.interactions).unwrap();
    write_kg(dir.join("d.kg"), &b.kg).unwrap();
    write_links(dir.join("d.link"), &b.dataset, &b.kg).unwrap();
}

const DATA: [&str; 6] = ["--inter", "d.inter", "--kg", "d.kg", "--link", "d.link"];

#[test]
fn subcommands_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_dataset(dir);

    let args = [&["--out", "pre", "preprocess", "--k-core", "2"][..], &DATA].concat();
    let stats = kgu(&args, dir);
    assert!(stats.contains("sparsity"));
    assert!(dir.join("pre/dataset.inter").exists());

    let args = [&["--seed", "4", "--out", "pert", "perturb", "--kind", "distort", "--ratio", "0.5"][..], &DATA].concat();
    kgu(&args, dir);
    let manifest = std::fs::read_to_string(dir.join("pert/distort.manifest.json")).unwrap();
    assert!(manifest.contains("\"distort\""));
    let args = [&["--out", "pert", "perturb", "--kind", "interaction_kg"][..], &DATA].concat();
    kgu(&args, dir);
    assert!(dir.join("pert/interaction_kg.link").exists());

    let args = [&["--seed", "4", "--out", "m", "train", "--model", "kgcn_lite"][..], &DATA].concat();
    kgu(&args, dir);
    let args = [&["--seed", "4", "--out", "m", "eval", "--checkpoint", "m/model.ckpt"][..], &DATA].concat();
    let metrics = kgu(&args, dir);
    assert!(metrics.contains("MRR") && metrics.contains("NDCG@10"));

    std::fs::write(
        dir.join("exp.toml"),
        r#"
suite = "rq2"
ratios = [0.0, 1.0]
repeats = 2
[dataset]
inter = "d.inter"
kg = "d.kg"
link = "d.link"
[model]
kind = "cfkg_lite"
params = { max_epochs = 3 }
"#,
    )
    .unwrap();
    kgu(&["--jobs", "2", "--out", "exp", "experiment", "--config", "exp.toml"], dir);
    for f in ["raw.csv", "agg.csv", "kger.csv", "kgus.csv", "plots.json", "manifest.json"] {
        assert!(dir.join("exp").join(f).exists(), "{f}");
    }
    let manifest = std::fs::read_to_string(dir.join("exp/manifest.json")).unwrap();
    assert!(manifest.contains(&dir.join("d.inter").canonicalize().unwrap().display().to_string()));

    kgu(&["--out", "rep", "report", "--raw", "exp/raw.csv"], dir);
    assert_eq!(
        std::fs::read(dir.join("rep/kger.csv")).unwrap(),
        std::fs::read(dir.join("exp/kger.csv")).unwrap()
    );
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kgu"))
        .args(["experiment", "--config", "missing.toml"])
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}
