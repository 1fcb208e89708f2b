//! The loss-threshold adversary against ridge regression: calibrate the
//! threshold on shadow models, then play the membership game.

use memleak::attack::{calibrate_threshold, run_membership_experiment};
use memleak::data::{synthetic_universe, SyntheticSpec};
use memleak::model::{ReleaseConfig, TrainingConfig};

pub fn run_example() -> memleak::Result<()> {
    let universe = synthetic_universe(&SyntheticSpec {
        records: 1000,
        features: 5,
        noise_std: 1.0,
        coefficient_seed: 1,
    })?;
    for lambda in [0.0, 1.0, 100.0] {
        let release = ReleaseConfig::new(TrainingConfig::ridge(lambda));
        let policy = calibrate_threshold(&universe, 10, &release, 20, 5)?;
        let result = run_membership_experiment(&universe, 10, &release, &policy, 4000, 5)?;
        let member_guesses = result.trials.iter().filter(|t| t.b_hat).count();
        println!(
            "lambda = {lambda:>5}: tau = {:.4}, correct {:.3}, Adv = {:.3}, guessed member {member_guesses}/{}",
            policy.tau,
            result.correct_fraction,
            result.advantage,
            result.trials.len()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
