//! A one-hidden-layer tanh network: training, then leakage and attack
//! advantage at two training-set sizes.

use memleak::attack::run_threshold_attack;
use memleak::data::{synthetic_universe, SyntheticSpec};
use memleak::leakage::{estimate_leakage, LeakageConfig};
use memleak::model::{fitness, train, MlpConfig, ReleaseConfig, TrainingConfig};

pub fn run_example() -> memleak::Result<()> {
    let universe = synthetic_universe(&SyntheticSpec { records: 500, features: 3, noise_std: 1.0, coefficient_seed: 4 })?;
    let mlp = MlpConfig { hidden: vec![4], epochs: 60, step_size: 0.1, batch_size: None };
    let training = TrainingConfig::mlp(1e-3, mlp);

    let members: Vec<usize> = (0..20).collect();
    let model = train(&universe, &members, &training, 11)?;
    println!(
        "{} parameters, training fitness {:.4}",
        model.dim(),
        fitness(&model, &universe, &members, &training)?
    );

    let release = ReleaseConfig::new(training);
    let config = LeakageConfig { trials: 200, probe_size: 3, alpha_member: None, mi_samples: 1000 };
    for n in [10, 40] {
        let est = estimate_leakage(&universe, n, &release, &config, 8)?;
        let adv = run_threshold_attack(&universe, n, &release, 10, 1000, 8)?.advantage;
        println!("n = {n:2}: rho_KL = {:.3}, Adv = {adv:.3}", est.rho_kl);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
