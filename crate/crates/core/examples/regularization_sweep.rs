//! A persisted regularization sweep: run, write logs, audit the table from
//! the logs, and render the plots.

use memleak::data::SyntheticSpec;
use memleak::experiment::{audit, emit_plots, rows_to_csv, run_sweep, write_sweep, ExperimentConfig, SweepConfig, SweepVar};
use memleak::leakage::LeakageConfig;

pub fn run_example() -> memleak::Result<()> {
    let mut base = ExperimentConfig::synthetic(SyntheticSpec {
        records: 1000,
        features: 5,
        noise_std: 1.0,
        coefficient_seed: 1,
    });
    base.leakage = LeakageConfig { trials: 60, probe_size: 8, alpha_member: None, mi_samples: 1000 };
    base.attack_trials = 2000;
    let config = SweepConfig {
        base,
        sweep: SweepVar::Lambda,
        grid: vec![0.0, 1e-2, 1.0, 100.0],
        seed_count: 2,
    };
    let out = run_sweep(&config)?;
    print!("{}", rows_to_csv(&out.rows));

    let dir = std::env::temp_dir().join(format!("memleak-sweep-{}", out.config_hash));
    write_sweep(&out, &config, &dir)?;
    let report = audit(&dir)?;
    println!("audit of {} rows: {}", report.rows_checked, if report.passed() { "exact" } else { "MISMATCH" });
    assert!(report.passed());
    for f in emit_plots(&out.rows, &dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> memleak::Result<()> {
    run_example()
}
