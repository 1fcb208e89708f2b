//! Per-record KL leakage of a ridge model on a synthetic universe, and how
//! it shrinks with the training-set size.

use memleak::data::{synthetic_universe, SyntheticSpec};
use memleak::leakage::{estimate_leakage, LeakageConfig};
use memleak::model::{ReleaseConfig, TrainingConfig};

pub fn run_example() -> memleak::Result<()> {
    let universe = synthetic_universe(&SyntheticSpec {
        records: 500,
        features: 3,
        noise_std: 1.0,
        coefficient_seed: 2,
    })?;
    let release = ReleaseConfig::new(TrainingConfig::ridge(0.0));
    let config = LeakageConfig {
        trials: 100,
        probe_size: 10,
        alpha_member: None,
        mi_samples: 2000,
    };
    for n in [8, 16, 32] {
        let est = estimate_leakage(&universe, n, &release, &config, 42)?;
        println!(
            "n = {n:3}: rho_KL = {:.4} +- {:.4}, rho_MI = {:.5} (bound {:.5}), success bound {:.3}",
            est.rho_kl, est.rho_kl_stderr, est.rho_mi, est.mi_upper, est.success_bound_capped
        );
        let worst = est
            .per_record
            .iter()
            .max_by(|a, b| a.rho_kl().total_cmp(&b.rho_kl()))
            .expect("probe set is nonempty");
        println!("        most exposed record {} ({:.4} nats)", worst.record_id, worst.rho_kl());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
