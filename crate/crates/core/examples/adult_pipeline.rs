//! Adult census data: ingest both files, project on five principal
//! components, and attack ridge models trained on small samples.

use std::path::PathBuf;

use memleak::attack::run_threshold_attack;
use memleak::data::{apply_pca, fit_pca, load_adult_csv, AdultSchema, PcaOptions};
use memleak::model::{ReleaseConfig, TrainingConfig};

pub fn run_example() -> memleak::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult");
    let files = [dir.join("adult.data"), dir.join("adult.test")];
    if !files.iter().all(|f| f.exists()) {
        println!("Adult files not found under {}; skipping", dir.display());
        return Ok(());
    }
    let adult = load_adult_csv(&files, &AdultSchema::standard())?;
    println!(
        "{} rows read, {} dropped for missing values, {} kept",
        adult.rows_read,
        adult.rows_dropped,
        adult.universe.len()
    );
    let pca = fit_pca(&adult.universe, 5, PcaOptions::default())?;
    println!("top component variances {:.3?}", pca.explained_variance);
    let universe = apply_pca(&pca, &adult.universe)?;

    let release = ReleaseConfig::new(TrainingConfig::ridge(0.0));
    for n in [10, 30, 100] {
        let r = run_threshold_attack(&universe, n, &release, 20, 2000, 3)?;
        println!("n = {n:3}: Adv = {:.3}", r.advantage);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
