use std::fmt::Write as _;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_subset_size, sample_excluding, DataUniverse};
use crate::error::{Error, Result};
use crate::leakage::{fit_gaussian, kl_gaussian, mi_mixture_estimate, GaussianFit};
use crate::model::{release, ModelParams, ReleaseConfig};
use crate::seed;
use crate::stats;

/// Whether the probe record is forced into, or kept out of, the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Member,
    NonMember,
}

impl Condition {
    fn tag(self) -> u64 {
        match self {
            Condition::Member => 1,
            Condition::NonMember => 0,
        }
    }
}

/// Training sets for one Monte-Carlo trial under `condition`, sorted.
pub fn conditional_training_set(
    universe_size: usize,
    record_id: usize,
    condition: Condition,
    n: usize,
    trial_seed: u64,
) -> Vec<usize> {
    let mut rng = seed::derived_rng(trial_seed, &[seed::tag::MASK]);
    let mut ids = match condition {
        Condition::Member => {
            let mut v = sample_excluding(&mut rng, universe_size, record_id, n - 1);
            v.push(record_id);
            v
        }
        Condition::NonMember => sample_excluding(&mut rng, universe_size, record_id, n),
    };
    ids.sort_unstable();
    ids
}

/// Released parameters from `trials` retrainings with (member) or without
/// (non-member) `record_id`. Companions are redrawn uniformly every trial.
pub fn sample_conditional_params(
    universe: &DataUniverse,
    record_id: usize,
    condition: Condition,
    n: usize,
    trials: usize,
    config: &ReleaseConfig,
    master_seed: u64,
) -> Result<Vec<ModelParams>> {
    let big_n = universe.len();
    check_subset_size(big_n, n)?;
    if record_id >= big_n {
        return Err(Error::Range(format!("record {record_id} outside universe of {big_n}")));
    }
    if trials == 0 {
        return Err(Error::Range("need at least one trial".into()));
    }
    (0..trials as u64)
        .map(|t| {
            let trial_seed = seed::derive(
                master_seed,
                &[seed::tag::CONDITIONAL, record_id as u64, condition.tag(), t],
            );
            let ids = conditional_training_set(big_n, record_id, condition, n, trial_seed);
            release(universe, &ids, config, trial_seed)
        })
        .collect()
}

/// Gaussian fits of the member and non-member parameter distributions for one record.
#[derive(Debug, Clone)]
pub struct RecordFits {
    pub member: GaussianFit,
    pub non_member: GaussianFit,
}

pub fn record_fits(
    universe: &DataUniverse,
    record_id: usize,
    n: usize,
    trials: usize,
    config: &ReleaseConfig,
    seed: u64,
) -> Result<RecordFits> {
    let member = sample_conditional_params(universe, record_id, Condition::Member, n, trials, config, seed)?;
    let non_member =
        sample_conditional_params(universe, record_id, Condition::NonMember, n, trials, config, seed)?;
    Ok(RecordFits {
        member: fit_gaussian(&member)?,
        non_member: fit_gaussian(&non_member)?,
    })
}

/// `(KL(member || non-member), KL(non-member || member))` for one record.
pub fn record_kl_leakage(
    universe: &DataUniverse,
    record_id: usize,
    n: usize,
    trials: usize,
    config: &ReleaseConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    let fits = record_fits(universe, record_id, n, trials, config, seed)?;
    kl_pair(&fits)
}

fn kl_pair(fits: &RecordFits) -> Result<(f64, f64)> {
    Ok((
        kl_gaussian(&fits.member, &fits.non_member)?,
        kl_gaussian(&fits.non_member, &fits.member)?,
    ))
}

/// Leakage figures for one probe record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordLeakage {
    pub record_id: usize,
    /// `KL(member || non-member)`.
    pub rho1: f64,
    /// `KL(non-member || member)`.
    pub rho2: f64,
    /// Mixture mutual-information estimate and its Monte-Carlo standard error.
    pub rho_mi: f64,
    pub rho_mi_stderr: f64,
}

impl RecordLeakage {
    pub fn rho_kl(&self) -> f64 {
        self.rho1 + self.rho2
    }
}

/// Aggregate leakage over a probe set, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    pub per_record: Vec<RecordLeakage>,
    pub rho_kl: f64,
    pub rho_kl_stderr: f64,
    pub rho_mi: f64,
    pub rho_mi_stderr: f64,
    /// `rho_kl / 4`, the upper bound on the mutual information.
    pub mi_upper: f64,
    /// `0.5 * sqrt(rho_kl)`; may exceed one.
    pub success_bound: f64,
    pub success_bound_capped: f64,
    pub alpha_member: f64,
}

/// Averages per-record figures over the probe set.
pub fn aggregate_leakage(per_record: &[RecordLeakage], alpha_member: f64) -> Result<LeakageEstimate> {
    if per_record.is_empty() {
        return Err(Error::Range("probe set is empty".into()));
    }
    if !(alpha_member > 0.0 && alpha_member < 1.0) {
        return Err(Error::Range(format!(
            "alpha_member must lie in (0, 1), got {alpha_member}"
        )));
    }
    let kl: Vec<f64> = per_record.iter().map(RecordLeakage::rho_kl).collect();
    let mi: Vec<f64> = per_record.iter().map(|r| r.rho_mi).collect();
    let rho_kl = stats::mean(&kl);
    let success_bound = 0.5 * rho_kl.sqrt();
    Ok(LeakageEstimate {
        per_record: per_record.to_vec(),
        rho_kl,
        rho_kl_stderr: stats::std_error(&kl),
        rho_mi: stats::mean(&mi),
        rho_mi_stderr: stats::std_error(&mi),
        mi_upper: rho_kl / 4.0,
        success_bound,
        success_bound_capped: success_bound.min(1.0),
        alpha_member,
    })
}

/// Monte-Carlo settings of the leakage estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageConfig {
    /// Retrainings per condition and probe record.
    pub trials: usize,
    /// Number of probe records, drawn uniformly without replacement.
    pub probe_size: usize,
    /// `P{member}`; defaults to `n / N`.
    #[serde(default)]
    pub alpha_member: Option<f64>,
    /// Draws per mixture component for the mutual-information estimate.
    pub mi_samples: usize,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            probe_size: 50,
            alpha_member: None,
            mi_samples: 2000,
        }
    }
}

impl LeakageConfig {
    pub fn alpha_for(&self, n: usize, universe_size: usize) -> f64 {
        self.alpha_member
            .unwrap_or(n as f64 / universe_size as f64)
    }
}

/// Probe records for a seed, sorted.
pub fn probe_set(universe_size: usize, probe_size: usize, seed: u64) -> Result<Vec<usize>> {
    if probe_size == 0 || probe_size > universe_size {
        return Err(Error::Range(format!(
            "probe size must be in 1..={universe_size}, got {probe_size}"
        )));
    }
    let mut rng = seed::derived_rng(seed, &[seed::tag::PROBE]);
    let mut ids = index::sample(&mut rng, universe_size, probe_size).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Full estimator: per-record KL pair and mixture MI over a random probe set.
pub fn estimate_leakage(
    universe: &DataUniverse,
    n: usize,
    release_config: &ReleaseConfig,
    config: &LeakageConfig,
    seed: u64,
) -> Result<LeakageEstimate> {
    check_subset_size(universe.len(), n)?;
    let alpha = config.alpha_for(n, universe.len());
    let probe = probe_set(universe.len(), config.probe_size, seed)?;
    let per_record: Result<Vec<RecordLeakage>> = probe
        .par_iter()
        .map(|&id| {
            let fits = record_fits(universe, id, n, config.trials, release_config, seed)?;
            let (rho1, rho2) = kl_pair(&fits)?;
            let mi = mi_mixture_estimate(
                &fits.non_member,
                &fits.member,
                alpha,
                config.mi_samples,
                seed::derive(seed, &[seed::tag::MIXTURE, id as u64]),
            )?;
            Ok(RecordLeakage {
                record_id: id,
                rho1,
                rho2,
                rho_mi: mi.value,
                rho_mi_stderr: mi.stderr,
            })
        })
        .collect();
    aggregate_leakage(&per_record?, alpha)
}

impl LeakageEstimate {
    /// Per-record CSV: `record_id,rho1,rho2,rho_kl_record`.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("record_id,rho1,rho2,rho_kl_record\n");
        for r in &self.per_record {
            let _ = writeln!(out, "{},{},{},{}", r.record_id, r.rho1, r.rho2, r.rho_kl());
        }
        out
    }

    /// Per-record mixture estimates: `record_id,rho_mi,rho_mi_stderr`.
    pub fn mi_csv(&self) -> String {
        let mut out = String::from("record_id,rho_mi,rho_mi_stderr\n");
        for r in &self.per_record {
            let _ = writeln!(out, "{},{},{}", r.record_id, r.rho_mi, r.rho_mi_stderr);
        }
        out
    }

    /// JSON summary with the run metadata.
    pub fn summary_json(&self, trials: usize, seed: u64) -> serde_json::Value {
        serde_json::json!({
            "rho_kl": self.rho_kl,
            "rho_kl_stderr": self.rho_kl_stderr,
            "rho_mi": self.rho_mi,
            "rho_mi_stderr": self.rho_mi_stderr,
            "mi_upper": self.mi_upper,
            "success_bound": self.success_bound,
            "success_bound_capped": self.success_bound_capped,
            "alpha_member": self.alpha_member,
            "probe_size": self.per_record.len(),
            "trials": trials,
            "seed": seed,
        })
    }
}

/// Rebuilds per-record figures from the two persisted CSV files.
pub fn parse_record_logs(records_csv: &str, mi_csv: &str) -> Result<Vec<RecordLeakage>> {
    fn rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<String>>> {
        let mut lines = text.lines();
        if lines.next() != Some(header) {
            return Err(Error::Parse { line: 1, message: format!("expected header {header}") });
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| {
                let f: Vec<String> = l.split(',').map(str::to_string).collect();
                if f.len() != width {
                    return Err(Error::Parse { line: i + 2, message: format!("expected {width} columns") });
                }
                Ok(f)
            })
            .collect()
    }
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse { line: 0, message: format!("{s:?}: {e}") })
    };
    let kl = rows(records_csv, "record_id,rho1,rho2,rho_kl_record", 4)?;
    let mi = rows(mi_csv, "record_id,rho_mi,rho_mi_stderr", 3)?;
    if kl.len() != mi.len() {
        return Err(Error::Parse { line: 0, message: "leakage logs disagree on probe size".into() });
    }
    kl.iter()
        .zip(&mi)
        .map(|(a, b)| {
            if a[0] != b[0] {
                return Err(Error::Parse { line: 0, message: "leakage logs disagree on record ids".into() });
            }
            Ok(RecordLeakage {
                record_id: a[0].parse().map_err(|_| Error::Parse { line: 0, message: "bad record id".into() })?,
                rho1: num(&a[1])?,
                rho2: num(&a[2])?,
                rho_mi: num(&b[1])?,
                rho_mi_stderr: num(&b[2])?,
            })
        })
        .collect()
}
