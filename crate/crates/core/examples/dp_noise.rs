//! Gaussian-mechanism noise: estimate the neighbor sensitivity of ridge,
//! calibrate sigma for a budget, and watch the attack advantage fall.

use memleak::attack::run_threshold_attack;
use memleak::data::{synthetic_universe, SyntheticSpec};
use memleak::model::{ReleaseConfig, TrainingConfig};
use memleak::privacy::{gaussian_mechanism_sigma, neighbor_sensitivity, DpBudget, SensitivityMode};

pub fn run_example() -> memleak::Result<()> {
    let small = synthetic_universe(&SyntheticSpec { records: 8, features: 2, noise_std: 0.5, coefficient_seed: 3 })?;
    let training = TrainingConfig::ridge(0.1);
    let exact = neighbor_sensitivity(&small, 4, &training, SensitivityMode::Exhaustive)?;
    let sampled = neighbor_sensitivity(&small, 4, &training, SensitivityMode::Sampled { pairs: 50, seed: 1 })?;
    println!(
        "8 records, n = 4: exhaustive {:.4} over {} pairs, sampled {:.4} over {} pairs",
        exact.delta_theta, exact.pairs_evaluated, sampled.delta_theta, sampled.pairs_evaluated
    );

    let universe = synthetic_universe(&SyntheticSpec { records: 1000, features: 5, noise_std: 1.0, coefficient_seed: 1 })?;
    let n = 30;
    let sens = neighbor_sensitivity(&universe, n, &training, SensitivityMode::Sampled { pairs: 500, seed: 2 })?;
    println!("n = {n}: sampled sensitivity {:.4}", sens.delta_theta);
    for epsilon in [f64::INFINITY, 1.0, 0.5, 0.1] {
        let sigma = if epsilon.is_finite() {
            gaussian_mechanism_sigma(sens.delta_theta, &DpBudget::new(epsilon, 1e-5)?)?
        } else {
            0.0
        };
        let release = ReleaseConfig::new(training.clone()).with_noise(sigma);
        let r = run_threshold_attack(&universe, n, &release, 20, 4000, 9)?;
        println!("epsilon = {epsilon:>4}: sigma = {sigma:.4}, Adv = {:.3}", r.advantage);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
