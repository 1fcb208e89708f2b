//! Divergences between Gaussian fits: closed-form KL, exact 1-D total
//! variation, and the Monte-Carlo mixture information with its KL bound.

use memleak::leakage::{fit_gaussian_vectors, kl_gaussian, mi_mixture_estimate, tv_gaussian_1d, GaussianFit, Normal1d};
use memleak::seed;
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> memleak::Result<()> {
    let p = GaussianFit::scalar(0.0, 1.0)?;
    let q = GaussianFit::scalar(1.0, 2.0)?;
    let (pq, qp) = (kl_gaussian(&p, &q)?, kl_gaussian(&q, &p)?);
    let tv = tv_gaussian_1d(&Normal1d::new(0.0, 1.0)?, &Normal1d::new(1.0, 2f64.sqrt())?);
    println!("KL(p||q) = {pq:.6}, KL(q||p) = {qp:.6}");
    println!("TV = {tv:.6}; Pinsker bound sqrt(KL/2) = {:.6}", (0.5 * pq.min(qp)).sqrt());
    assert!(tv * tv <= 0.5 * pq.min(qp));

    let mi = mi_mixture_estimate(&p, &q, 0.5, 20_000, 7)?;
    println!(
        "mixture information {:.5} +- {:.5} nats <= (KL sum)/4 = {:.5}",
        mi.value,
        mi.stderr,
        (pq + qp) / 4.0
    );

    // fitting from samples recovers the covariance
    let truth = GaussianFit::new(vec![1.0, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.5]))?;
    let mut rng = seed::rng(1);
    let samples: Vec<Vec<f64>> = (0..2000).map(|_| truth.sample(&mut rng)).collect();
    let fit = fit_gaussian_vectors(&samples)?;
    println!("KL(truth || fit from 2000 draws) = {:.2e}", kl_gaussian(&truth, &fit)?);

    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let scalar: Vec<Vec<f64>> = (0..500).map(|_| vec![noise.sample(&mut rng)]).collect();
    println!("fitted scalar variance {:.3}", fit_gaussian_vectors(&scalar)?.cov()[(0, 0)]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
