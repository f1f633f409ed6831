//! Load atomic files, keep positive ratings, apply a k-core filter and
//! report sparsity.
//!
//! cargo run --example preprocess

use std::fs;

use kg_utilization::dataio::{dataset_stats, filter_by_rating, k_core_filter, Bundle};

const INTER: &str = "user_id:token\titem_id:token\trating:float
alice\tm1\t5
alice\tm2\t4
alice\tm3\t2
bob\tm1\t4
bob\tm2\t5
bob\tm4\t4
carol\tm2\t4
carol\tm3\t5
carol\tm1\t4
dave\tm4\t1
";

const KG: &str = "head_id\trelation_id\ttail_id
Q1\tdirected_by\tQ100
Q2\tdirected_by\tQ100
Q3\tgenre\tQ200
Q1\tgenre\tQ200
";

const LINK: &str = "item_id\tentity_id
m1\tQ1
m2\tQ2
m3\tQ3
";

fn main() -> kg_utilization::Result<()> {
    let dir = std::env::temp_dir().join("kgu-preprocess");
    fs::create_dir_all(&dir).expect("temp dir");
    for (name, text) in [("toy.inter", INTER), ("toy.kg", KG), ("toy.link", LINK)] {
        fs::write(dir.join(name), text).expect("write");
    }
    let bundle = Bundle::load(dir.join("toy.inter"), dir.join("toy.kg"), dir.join("toy.link"))?;
    // m4 has no link row and gets an isolated entity
    println!("unlinked items: {:?}", bundle.flagged_items);
    println!("raw:      {:?}", dataset_stats(&bundle.dataset)?);

    let bundle = bundle.map_dataset(|d| filter_by_rating(d, 4.0))?;
    println!("rating>=4 {:?}", dataset_stats(&bundle.dataset)?);

    let bundle = bundle.map_dataset(|d| Ok(k_core_filter(d, 1)))?;
    let s = dataset_stats(&bundle.dataset)?;
    println!("2-core:   {s:?}");
    println!("users kept: {:?}", bundle.dataset.user_labels);
    Ok(())
}
