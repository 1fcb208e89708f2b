use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{calibrate_threshold, run_membership_experiment, ExperimentResult};
use crate::error::{Error, Result};
use crate::experiment::{SweepConfig, SweepVar};
use crate::leakage::{estimate_leakage, parse_record_logs, LeakageEstimate, RecordLeakage};
use crate::stats;

/// Bit-exact header of the sweep table.
pub const SWEEP_HEADER: &str =
    "sweep_var,sweep_value,adv_mean,adv_std,rho_kl,rho_kl_stderr,rho_mi,success_bound,seed_count,config_hash";

/// One line of the sweep table. Leakage columns are NaN when leakage
/// estimation is switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub adv_mean: f64,
    pub adv_std: f64,
    pub rho_kl: f64,
    pub rho_kl_stderr: f64,
    pub rho_mi: f64,
    pub success_bound: f64,
    pub seed_count: usize,
    pub config_hash: String,
}

/// Raw results of one repetition at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub leakage: Option<LeakageEstimate>,
    pub attack: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub value: f64,
    pub per_seed: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    pub points: Vec<GridOutcome>,
}

/// Row statistics from per-seed attack results and per-seed probe records.
///
/// Advantage is averaged over seeds; leakage pools every probe record of
/// every seed.
pub fn summarize(
    var: SweepVar,
    value: f64,
    attacks: &[ExperimentResult],
    records: Option<&[Vec<RecordLeakage>]>,
    config_hash: &str,
) -> SweepRow {
    let adv: Vec<f64> = attacks.iter().map(|a| a.advantage).collect();
    let adv_std = if adv.len() > 1 { stats::sample_std(&adv) } else { 0.0 };
    let (rho_kl, rho_kl_stderr, rho_mi) = match records {
        Some(per_seed) => {
            let kl: Vec<f64> = per_seed.iter().flatten().map(RecordLeakage::rho_kl).collect();
            let mi: Vec<f64> = per_seed.iter().flatten().map(|r| r.rho_mi).collect();
            let se = if kl.len() > 1 { stats::std_error(&kl) } else { 0.0 };
            (stats::mean(&kl), se, stats::mean(&mi))
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    SweepRow {
        sweep_var: var,
        sweep_value: value,
        adv_mean: stats::mean(&adv),
        adv_std,
        rho_kl,
        rho_kl_stderr,
        rho_mi,
        success_bound: 0.5 * rho_kl.sqrt(),
        seed_count: attacks.len(),
        config_hash: config_hash.to_string(),
    }
}

/// Runs leakage estimation and the threshold attack at every grid point and
/// seed. Repetition `k` uses the same seed at every grid point.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let hash = config.hash()?;
    let full = config.base.dataset.load(config.max_p_x())?;
    if let Some(p) = config.points().iter().find(|p| p.n >= full.len()) {
        return Err(Error::Config(format!(
            "n = {} needs a universe larger than {}",
            p.n,
            full.len()
        )));
    }
    let mut points = Vec::with_capacity(config.grid.len());
    let mut rows = Vec::with_capacity(config.grid.len());
    for (&value, params) in config.grid.iter().zip(config.points()) {
        let universe = if params.p_x == full.n_features() {
            full.clone()
        } else {
            full.leading_features(params.p_x)?
        };
        let release = config.base.release_config(&params, &universe)?;
        let mut per_seed = Vec::with_capacity(config.seed_count);
        for k in 0..config.seed_count {
            let s = config.repetition_seed(k);
            let leakage = if config.base.estimate_leakage {
                Some(estimate_leakage(&universe, params.n, &release, &config.base.leakage, s)?)
            } else {
                None
            };
            let policy = calibrate_threshold(&universe, params.n, &release, config.base.shadow_count, s)?;
            let attack = run_membership_experiment(&universe, params.n, &release, &policy, config.base.attack_trials, s)?;
            per_seed.push(SeedOutcome { leakage, attack });
        }
        let attacks: Vec<ExperimentResult> = per_seed.iter().map(|o| o.attack.clone()).collect();
        let records: Option<Vec<Vec<RecordLeakage>>> = per_seed
            .iter()
            .map(|o| o.leakage.as_ref().map(|l| l.per_record.clone()))
            .collect();
        rows.push(summarize(config.sweep, value, &attacks, records.as_deref(), &hash));
        points.push(GridOutcome { value, per_seed });
    }
    Ok(SweepOutput { config_hash: hash, rows, points })
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.sweep_var,
            r.sweep_value,
            r.adv_mean,
            r.adv_std,
            r.rho_kl,
            r.rho_kl_stderr,
            r.rho_mi,
            r.success_bound,
            r.seed_count,
            r.config_hash
        );
    }
    out
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::Parse { line: 1, message: "unexpected sweep header".into() });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let line = i + 2;
            let bad = |message: String| Error::Parse { line, message };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(bad(format!("expected 10 columns, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            Ok(SweepRow {
                sweep_var: f[0].parse()?,
                sweep_value: num(f[1])?,
                adv_mean: num(f[2])?,
                adv_std: num(f[3])?,
                rho_kl: num(f[4])?,
                rho_kl_stderr: num(f[5])?,
                rho_mi: num(f[6])?,
                success_bound: num(f[7])?,
                seed_count: f[8].parse().map_err(|e| bad(format!("{e}")))?,
                config_hash: f[9].to_string(),
            })
        })
        .collect()
}

/// Index of everything a persisted sweep wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: SweepConfig,
    pub sweep_csv: String,
    pub points: Vec<ManifestPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub sweep_value: f64,
    pub seeds: Vec<SeedFiles>,
}

/// Log files of one repetition, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFiles {
    pub trials: String,
    pub leakage: Option<String>,
    pub mi: Option<String>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `sweep.csv`, every trial and leakage log under `logs/`, and
/// `manifest.json`. Returns the manifest path.
pub fn write_sweep(output: &SweepOutput, config: &SweepConfig, dir: &Path) -> Result<PathBuf> {
    let logs = dir.join("logs");
    fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;
    let mut points = Vec::with_capacity(output.points.len());
    for (g, point) in output.points.iter().enumerate() {
        let mut seeds = Vec::with_capacity(point.per_seed.len());
        for (k, outcome) in point.per_seed.iter().enumerate() {
            let stem = format!("logs/{}_{g}_seed{k}", config.sweep);
            let trials = format!("{stem}_trials.csv");
            write(&dir.join(&trials), &outcome.attack.to_csv())?;
            let (leakage, mi) = match &outcome.leakage {
                Some(l) => {
                    let (a, b) = (format!("{stem}_leakage.csv"), format!("{stem}_mi.csv"));
                    write(&dir.join(&a), &l.records_csv())?;
                    write(&dir.join(&b), &l.mi_csv())?;
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            seeds.push(SeedFiles { trials, leakage, mi });
        }
        points.push(ManifestPoint { sweep_value: point.value, seeds });
    }
    write(&dir.join("sweep.csv"), &rows_to_csv(&output.rows))?;
    let manifest = Manifest {
        config_hash: output.config_hash.clone(),
        config: config.clone(),
        sweep_csv: "sweep.csv".into(),
        points,
    };
    let path = dir.join("manifest.json");
    write(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Outcome of re-deriving a sweep table from its logs.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rows_checked: usize,
    /// `(line, stored, recomputed)` for every differing line of `sweep.csv`.
    pub mismatches: Vec<(usize, String, String)>,
    pub hash_matches: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.hash_matches
    }
}

/// Recomputes every statistic of `sweep.csv` from the logs listed in the
/// manifest and compares the rendered table byte for byte.
pub fn audit(dir: &Path) -> Result<AuditReport> {
    let manifest: Manifest = serde_json::from_str(&read(&dir.join("manifest.json"))?)?;
    let hash_matches = manifest.config.hash()? == manifest.config_hash;
    let var = manifest.config.sweep;
    let mut rows = Vec::with_capacity(manifest.points.len());
    for point in &manifest.points {
        let mut attacks = Vec::with_capacity(point.seeds.len());
        let mut records = Vec::with_capacity(point.seeds.len());
        let mut all_leakage = true;
        for s in &point.seeds {
            attacks.push(ExperimentResult::parse_csv(&read(&dir.join(&s.trials))?)?);
            match (&s.leakage, &s.mi) {
                (Some(a), Some(b)) => {
                    records.push(parse_record_logs(&read(&dir.join(a))?, &read(&dir.join(b))?)?)
                }
                _ => all_leakage = false,
            }
        }
        let recs = all_leakage.then_some(records.as_slice());
        rows.push(summarize(var, point.sweep_value, &attacks, recs, &manifest.config_hash));
    }
    let stored = read(&dir.join(&manifest.sweep_csv))?;
    let recomputed = rows_to_csv(&rows);
    let mut mismatches = Vec::new();
    let (a, b): (Vec<&str>, Vec<&str>) = (stored.lines().collect(), recomputed.lines().collect());
    for i in 0..a.len().max(b.len()) {
        let (x, y) = (a.get(i).copied().unwrap_or(""), b.get(i).copied().unwrap_or(""));
        if x != y {
            mismatches.push((i + 1, x.to_string(), y.to_string()));
        }
    }
    if mismatches.is_empty() && stored != recomputed {
        mismatches.push((0, "trailing bytes differ".into(), String::new()));
    }
    Ok(AuditReport { rows_checked: rows.len(), mismatches, hash_matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticSpec;
    use crate::experiment::ExperimentConfig;
    use crate::leakage::LeakageConfig;

    fn small(var: SweepVar, grid: Vec<f64>) -> SweepConfig {
        let mut base = ExperimentConfig::synthetic(SyntheticSpec {
            records: 120,
            features: 3,
            noise_std: 1.0,
            coefficient_seed: 4,
        });
        base.params.p_x = 3;
        base.leakage = LeakageConfig { trials: 20, probe_size: 3, alpha_member: None, mi_samples: 1000 };
        base.attack_trials = 200;
        base.shadow_count = 3;
        base.seed = 9;
        SweepConfig { base, sweep: var, grid, seed_count: 2 }
    }

    #[test]
    fn csv_round_trip() {
        let out = run_sweep(&small(SweepVar::N, vec![5.0, 10.0])).unwrap();
        let csv = rows_to_csv(&out.rows);
        assert!(csv.starts_with(SWEEP_HEADER));
        assert_eq!(parse_sweep_csv(&csv).unwrap(), out.rows);
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.seed_count == 2));
    }

    #[test]
    fn zero_loss_scale_leaks_nothing_at_every_lambda() {
        let mut c = small(SweepVar::Lambda, vec![1e-4, 1e-2, 1.0]);
        c.base.params.loss_scale = 0.0;
        let out = run_sweep(&c).unwrap();
        assert!(out.rows.iter().all(|r| r.rho_kl <= 1e-6), "{:?}", out.rows);
    }

    #[test]
    fn leakage_can_be_switched_off() {
        let mut c = small(SweepVar::Sigma, vec![0.0, 1.0]);
        c.base.estimate_leakage = false;
        let out = run_sweep(&c).unwrap();
        assert!(out.rows[0].rho_kl.is_nan());
        let dir = tempfile::tempdir().unwrap();
        write_sweep(&out, &c, dir.path()).unwrap();
        assert!(audit(dir.path()).unwrap().passed());
    }

    #[test]
    fn persisted_sweep_audits_and_reruns_identically() {
        let c = small(SweepVar::PX, vec![1.0, 2.0, 3.0]);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_sweep(&run_sweep(&c).unwrap(), &c, d1.path()).unwrap();
        write_sweep(&run_sweep(&c).unwrap(), &c, d2.path()).unwrap();
        let a = fs::read(d1.path().join("sweep.csv")).unwrap();
        assert_eq!(a, fs::read(d2.path().join("sweep.csv")).unwrap());
        let report = audit(d1.path()).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.rows_checked, 3);

        // a tampered trial log is caught
        let log = d1.path().join("logs/p_x_1_seed0_trials.csv");
        let text = fs::read_to_string(&log).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let f: Vec<&str> = lines[1].split(',').collect();
        let flipped = if f[3] == "1" { "0" } else { "1" };
        lines[1] = format!("{},{},{},{},{},{},{}", f[0], f[1], f[2], flipped, f[4], f[5], f[6]);
        fs::write(&log, lines.join("\n") + "\n").unwrap();
        let report = audit(d1.path()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.mismatches.len(), 1);
    }

    #[test]
    fn universe_too_small_is_a_config_error() {
        let c = small(SweepVar::N, vec![10.0, 500.0]);
        assert!(matches!(run_sweep(&c), Err(Error::Config(_))));
    }
}
