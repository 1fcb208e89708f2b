//! Principal components of a correlated universe and nested feature counts.

use memleak::data::{apply_pca, fit_pca, DataUniverse, PcaOptions};
use memleak::seed;
use rand_distr::{Distribution, StandardNormal};

pub fn run_example() -> memleak::Result<()> {
    let mut rng = seed::rng(5);
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = StandardNormal.sample(&mut rng);
            vec![a, a + 0.1 * b, 3.0 * c, b]
        })
        .collect();
    let labels = rows.iter().map(|r| r[0] - r[2]).collect();
    let universe = DataUniverse::from_rows(&rows, labels)?;

    for standardize in [true, false] {
        let pca = fit_pca(&universe, 4, PcaOptions { standardize })?;
        println!("standardize = {standardize}: variances {:.3?}", pca.explained_variance);
    }
    let pca = fit_pca(&universe, 4, PcaOptions::default())?;
    let projected = apply_pca(&pca, &universe)?;
    for p in 1..=4 {
        let narrow = projected.leading_features(p)?;
        println!("p_x = {p}: first record {:.3?}", narrow.features(0));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
