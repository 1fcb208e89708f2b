use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memleak::attack::{calibrate_threshold, run_membership_experiment};
use memleak::data::{apply_pca, fit_pca, load_adult_csv, synthetic_universe, AdultSchema, PcaOptions, SyntheticSpec};
use memleak::experiment::{
    audit, emit_plots, parse_sweep_csv, rows_to_csv, run_sweep, write_sweep, DatasetSpec, ExperimentConfig,
    PrivacySpec, SweepConfig, SweepVar,
};
use memleak::leakage::estimate_leakage;
use memleak::{Error, Result};

#[derive(Parser)]
#[command(name = "memleak", version, about = "Membership leakage estimation and membership attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load Adult files or generate a synthetic universe and write it as CSV.
    Ingest(IngestArgs),
    /// Estimate per-record KL leakage and the mixture information.
    Leakage(RunArgs),
    /// Calibrate the threshold adversary and play the membership game.
    Attack(RunArgs),
    /// Run a one-variable sweep and persist the table with all logs.
    Sweep(SweepArgs),
    /// Recompute a persisted sweep table from its logs.
    Audit {
        #[arg(long, default_value = "sweep_out")]
        dir: PathBuf,
    },
    /// Render plots from a persisted sweep table.
    Plot {
        #[arg(long, default_value = "sweep_out")]
        dir: PathBuf,
        /// Output directory; defaults to the sweep directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Adult-layout file; repeat to concatenate (e.g. adult.data and adult.test).
    #[arg(long = "adult")]
    adult: Vec<PathBuf>,
    /// Principal components kept from the Adult columns.
    #[arg(long, default_value_t = 5)]
    p_x: usize,
    /// Generate a synthetic universe with this many records instead.
    #[arg(long, conflicts_with = "adult")]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "universe.csv")]
    out: PathBuf,
}

/// Overrides shared by every command that trains models.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// JSON configuration; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use this universe CSV as the dataset.
    #[arg(long)]
    universe: Option<PathBuf>,
    /// Master seed for every derived random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Training-set size.
    #[arg(long)]
    n: Option<usize>,
    /// Ridge penalty.
    #[arg(long)]
    lambda: Option<f64>,
    /// Feature dimension (leading columns).
    #[arg(long)]
    p_x: Option<usize>,
    /// Multiplier on the training loss.
    #[arg(long)]
    loss_scale: Option<f64>,
    /// Fixed noise standard deviation added before quantization.
    #[arg(long, conflicts_with = "epsilon")]
    sigma: Option<f64>,
    /// Privacy budget; noise is calibrated from the estimated sensitivity.
    #[arg(long, requires = "delta")]
    epsilon: Option<f64>,
    /// Privacy failure probability.
    #[arg(long, requires = "epsilon")]
    delta: Option<f64>,
    /// Random neighbor pairs for the sensitivity estimate (default: enumerate all).
    #[arg(long = "sensitivity-pairs", value_name = "K", requires = "epsilon")]
    sensitivity_pairs: Option<usize>,
    /// Accept epsilon > 1 (outside the classical Gaussian-mechanism range).
    #[arg(long)]
    allow_large_epsilon: bool,
    /// Retrainings per condition and probe record.
    #[arg(long)]
    trials: Option<usize>,
    /// Probe records for the leakage estimate.
    #[arg(long)]
    probe_size: Option<usize>,
    /// Membership-game trials.
    #[arg(long)]
    attack_trials: Option<usize>,
    /// Shadow releases used to calibrate the threshold.
    #[arg(long)]
    shadow_count: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value = "run_out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Variable to sweep: n, lambda, p_x, sigma or loss_scale.
    #[arg(long)]
    sweep: Option<SweepVar>,
    /// Comma-separated, strictly increasing grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Independent repetitions per grid value (default 5).
    #[arg(long)]
    seed_count: Option<usize>,
    #[arg(long, default_value = "sweep_out")]
    out: PathBuf,
}

fn desk_scale() -> ExperimentConfig {
    ExperimentConfig::synthetic(SyntheticSpec {
        records: 2000,
        features: 5,
        noise_std: 1.0,
        coefficient_seed: 1,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn apply(o: &Overrides, c: &mut ExperimentConfig) -> Result<()> {
    if let Some(p) = &o.universe {
        c.dataset = DatasetSpec::Csv { path: p.clone() };
    }
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(c.seed, o.seed);
    set!(c.params.n, o.n);
    set!(c.params.lambda, o.lambda);
    set!(c.params.p_x, o.p_x);
    set!(c.params.loss_scale, o.loss_scale);
    set!(c.params.sigma, o.sigma);
    set!(c.leakage.trials, o.trials);
    set!(c.leakage.probe_size, o.probe_size);
    set!(c.attack_trials, o.attack_trials);
    set!(c.shadow_count, o.shadow_count);
    if let (Some(epsilon), Some(delta)) = (o.epsilon, o.delta) {
        c.privacy = Some(PrivacySpec {
            epsilon,
            delta,
            sensitivity_pairs: o.sensitivity_pairs,
            allow_large_epsilon: o.allow_large_epsilon,
        });
        c.params.sigma = 0.0;
    }
    if let Some(p) = &mut c.privacy {
        p.allow_large_epsilon |= o.allow_large_epsilon;
        if p.epsilon > 1.0 && p.allow_large_epsilon {
            eprintln!(
                "warning: epsilon = {} > 1; the Gaussian-mechanism guarantee is only classical for epsilon <= 1",
                p.epsilon
            );
        }
    }
    Ok(())
}

fn experiment_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match &o.config {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => desk_scale(),
    };
    apply(o, &mut c)?;
    c.validate()?;
    Ok(c)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let universe = if let Some(records) = a.synthetic {
        let u = synthetic_universe(&SyntheticSpec {
            records,
            features: a.p_x,
            noise_std: a.noise_std,
            coefficient_seed: a.seed,
        })?;
        println!("synthetic universe: {} records, {} features", u.len(), u.n_features());
        u
    } else {
        if a.adult.is_empty() {
            return Err(Error::Config("give --adult files or --synthetic N".into()));
        }
        let adult = load_adult_csv(&a.adult, &AdultSchema::standard())?;
        println!(
            "rows read: {}\nrows dropped (missing values): {}\nrows kept: {}",
            adult.rows_read,
            adult.rows_dropped,
            adult.universe.len()
        );
        let pca = fit_pca(&adult.universe, a.p_x, PcaOptions::default())?;
        println!("explained variance: {:?}", pca.explained_variance);
        apply_pca(&pca, &adult.universe)?
    };
    universe.write_csv(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn leakage(a: &RunArgs) -> Result<()> {
    let c = experiment_config(&a.overrides)?;
    let u = c.dataset.load(c.params.p_x)?.leading_features(c.params.p_x)?;
    let release = c.release_config(&c.params, &u)?;
    let est = estimate_leakage(&u, c.params.n, &release, &c.leakage, c.seed)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("leakage_records.csv"), &est.records_csv())?;
    write_file(&a.out.join("leakage_mi.csv"), &est.mi_csv())?;
    let mut summary = est.summary_json(c.leakage.trials, c.seed);
    summary["sigma"] = release.noise_sigma.into();
    write_file(&a.out.join("leakage_summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn attack(a: &RunArgs) -> Result<()> {
    let c = experiment_config(&a.overrides)?;
    let u = c.dataset.load(c.params.p_x)?.leading_features(c.params.p_x)?;
    let release = c.release_config(&c.params, &u)?;
    let policy = calibrate_threshold(&u, c.params.n, &release, c.shadow_count, c.seed)?;
    let r = run_membership_experiment(&u, c.params.n, &release, &policy, c.attack_trials, c.seed)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("attack_trials.csv"), &r.to_csv())?;
    println!(
        "tau = {}\nsigma = {}\ntrials = {}\ncorrect fraction = {}\nadvantage = {}",
        policy.tau,
        release.noise_sigma,
        r.trials.len(),
        r.correct_fraction,
        r.advantage
    );
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut c: SweepConfig = match &a.overrides.config {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => SweepConfig {
            base: desk_scale(),
            sweep: a.sweep.ok_or_else(|| Error::Config("give --config or --sweep and --grid".into()))?,
            grid: a.grid.clone().ok_or_else(|| Error::Config("give --grid".into()))?,
            seed_count: 5,
        },
    };
    apply(&a.overrides, &mut c.base)?;
    if let Some(v) = a.sweep {
        c.sweep = v;
    }
    if let Some(g) = &a.grid {
        c.grid = g.clone();
    }
    if let Some(k) = a.seed_count {
        c.seed_count = k;
    }
    c.validate()?;
    let out = run_sweep(&c)?;
    write_sweep(&out, &c, &a.out)?;
    print!("{}", rows_to_csv(&out.rows));
    println!("config hash {}; outputs in {}", out.config_hash, a.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ingest(a) => ingest(&a)?,
        Command::Leakage(a) => leakage(&a)?,
        Command::Attack(a) => attack(&a)?,
        Command::Sweep(a) => sweep(&a)?,
        Command::Audit { dir } => {
            let r = audit(&dir)?;
            if !r.hash_matches {
                println!("config hash in manifest does not match the stored config");
            }
            for (line, stored, recomputed) in &r.mismatches {
                println!("line {line}:\n  stored     {stored}\n  recomputed {recomputed}");
            }
            println!(
                "audit {}: {} rows recomputed from logs",
                if r.passed() { "passed" } else { "FAILED" },
                r.rows_checked
            );
            return Ok(r.passed());
        }
        Command::Plot { dir, out } => {
            let csv = dir.join("sweep.csv");
            let rows = parse_sweep_csv(&read_text(&csv)?)?;
            for f in emit_plots(&rows, out.as_deref().unwrap_or(&dir))? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
