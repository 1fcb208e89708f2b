//! The membership game and the loss-threshold adversary.
//!
//! Each trial draws a fresh training set of size `n`, releases a model, flips
//! a fair coin `b`, and shows the adversary a record drawn from the training
//! set (`b = 1`) or from the rest of the universe (`b = 0`). The advantage is
//! `|2 P{b_hat = b} - 1|`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_subset_size, DataUniverse};
use crate::error::{Error, Result};
use crate::model::{release, ModelParams, ReleaseConfig};
use crate::seed;
use crate::stats;

/// What the adversary is shown in one trial.
#[derive(Debug, Clone, Copy)]
pub struct Challenge<'a> {
    pub model: &'a ModelParams,
    pub record_id: usize,
    pub features: &'a [f64],
    pub label: f64,
    /// Squared error of the released model on the challenge record.
    pub loss: f64,
    /// The hidden membership bit. A real adversary must not read it; it is
    /// here so reference adversaries (oracle, coin flip) fit the same trait.
    pub b: bool,
    /// Per-trial seed, for randomized adversaries.
    pub seed: u64,
}

pub trait Adversary: Sync {
    /// `true` means "member".
    fn decide(&self, challenge: &Challenge<'_>) -> bool;

    /// Threshold recorded in the trial log, if the adversary has one.
    fn threshold(&self) -> f64 {
        f64::NAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Threshold,
}

/// Loss-threshold adversary: guess "member" iff the loss is at most `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryPolicy {
    pub kind: PolicyKind,
    pub tau: f64,
}

impl AdversaryPolicy {
    pub fn threshold(tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::Range(format!("threshold must be finite, got {tau}")));
        }
        Ok(Self {
            kind: PolicyKind::Threshold,
            tau,
        })
    }
}

impl Adversary for AdversaryPolicy {
    fn decide(&self, challenge: &Challenge<'_>) -> bool {
        challenge.loss <= self.tau
    }

    fn threshold(&self) -> f64 {
        self.tau
    }
}

/// Unscaled squared error of `model` on one record.
pub fn record_loss(model: &ModelParams, features: &[f64], label: f64) -> f64 {
    model.loss(features, label, 1.0)
}

/// Threshold decision for one record; the boundary counts as "member".
pub fn threshold_decide(policy: &AdversaryPolicy, model: &ModelParams, features: &[f64], label: f64) -> bool {
    record_loss(model, features, label) <= policy.tau
}

/// Sets `tau` to the mean training loss of `shadow_count` shadow releases,
/// each on its own uniformly drawn training set of size `n`.
pub fn calibrate_threshold(
    universe: &DataUniverse,
    n: usize,
    config: &ReleaseConfig,
    shadow_count: usize,
    seed: u64,
) -> Result<AdversaryPolicy> {
    check_subset_size(universe.len(), n)?;
    if shadow_count == 0 {
        return Err(Error::Range("need at least one shadow model".into()));
    }
    let per_model: Result<Vec<f64>> = (0..shadow_count as u64)
        .map(|k| {
            let s = seed::derive(seed, &[seed::tag::SHADOW, k]);
            let members = draw_training_set(universe.len(), n, s);
            let model = release(universe, &members, config, s)?;
            let losses: Vec<f64> = members
                .iter()
                .map(|&i| record_loss(&model, universe.features(i), universe.label(i)))
                .collect();
            Ok(stats::mean(&losses))
        })
        .collect();
    AdversaryPolicy::threshold(stats::mean(&per_model?))
}

fn draw_training_set(universe_size: usize, n: usize, trial_seed: u64) -> Vec<usize> {
    let mut rng = seed::derived_rng(trial_seed, &[seed::tag::MASK]);
    let mut ids = rand::seq::index::sample(&mut rng, universe_size, n).into_vec();
    ids.sort_unstable();
    ids
}

/// One round of the membership game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipTrial {
    pub trial: usize,
    pub record_id: usize,
    pub b: bool,
    pub b_hat: bool,
    pub loss: f64,
    pub tau: f64,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: Vec<MembershipTrial>,
    pub advantage: f64,
    pub correct_fraction: f64,
}

impl ExperimentResult {
    /// Recomputes the statistics from the trial list.
    pub fn from_trials(trials: Vec<MembershipTrial>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Range("no trials".into()));
        }
        let correct = trials.iter().filter(|t| t.b == t.b_hat).count();
        let correct_fraction = correct as f64 / trials.len() as f64;
        Ok(Self {
            trials,
            advantage: advantage(correct_fraction),
            correct_fraction,
        })
    }

    /// Trial log: `trial,record_id,b,b_hat,loss,tau,sigma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,record_id,b,b_hat,loss,tau,sigma\n");
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t.trial, t.record_id, t.b as u8, t.b_hat as u8, t.loss, t.tau, t.sigma
            );
        }
        out
    }

    /// Parses a trial log back; trial seeds are not logged and read as 0.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("trial,record_id,b,b_hat,loss,tau,sigma") {
            return Err(Error::Parse { line: 1, message: "unexpected trial log header".into() });
        }
        let trials: Result<Vec<MembershipTrial>> = lines
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| parse_trial(l).map_err(|message| Error::Parse { line: i + 2, message }))
            .collect();
        Self::from_trials(trials?)
    }
}

fn parse_trial(line: &str) -> std::result::Result<MembershipTrial, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 7 {
        return Err(format!("expected 7 columns, found {}", f.len()));
    }
    let bit = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("bad bit {s:?}")),
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let int = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    Ok(MembershipTrial {
        trial: int(f[0])?,
        record_id: int(f[1])?,
        b: bit(f[2])?,
        b_hat: bit(f[3])?,
        loss: num(f[4])?,
        tau: num(f[5])?,
        sigma: num(f[6])?,
        seed: 0,
    })
}

/// `|2 p - 1|`.
pub fn advantage(correct_fraction: f64) -> f64 {
    (2.0 * correct_fraction - 1.0).abs()
}

/// Plays `trials` rounds of the membership game against `adversary`.
///
/// Trial `t` uses seed `derive(master_seed, [ATTACK, t])` for its training
/// set, release noise, coin and challenge record, so two configurations run
/// with the same master seed share all of that randomness.
pub fn run_membership_experiment<A: Adversary + ?Sized>(
    universe: &DataUniverse,
    n: usize,
    config: &ReleaseConfig,
    adversary: &A,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentResult> {
    let big_n = universe.len();
    check_subset_size(big_n, n)?;
    if trials == 0 {
        return Err(Error::Range("need at least one trial".into()));
    }
    let rows: Result<Vec<MembershipTrial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed::derive(master_seed, &[seed::tag::ATTACK, t as u64]);
            let members = draw_training_set(big_n, n, trial_seed);
            let model = release(universe, &members, config, trial_seed)?;
            let mut rng = seed::derived_rng(trial_seed, &[seed::tag::ATTACK]);
            let b: bool = rng.random();
            let record_id = if b {
                members[rng.random_range(0..n)]
            } else {
                sample_excluding_set(&mut rng, big_n, &members)
            };
            let (features, label) = (universe.features(record_id), universe.label(record_id));
            let loss = record_loss(&model, features, label);
            let challenge = Challenge { model: &model, record_id, features, label, loss, b, seed: trial_seed };
            Ok(MembershipTrial {
                trial: t,
                record_id,
                b,
                b_hat: adversary.decide(&challenge),
                loss,
                tau: adversary.threshold(),
                sigma: config.noise_sigma,
                seed: trial_seed,
            })
        })
        .collect();
    ExperimentResult::from_trials(rows?)
}

/// Uniform draw from `0..universe_size` minus the sorted `members`.
fn sample_excluding_set<R: Rng + ?Sized>(rng: &mut R, universe_size: usize, members: &[usize]) -> usize {
    let mut k = rng.random_range(0..universe_size - members.len());
    // walk past the members at or below the candidate
    for &m in members {
        if m <= k {
            k += 1;
        } else {
            break;
        }
    }
    k
}

/// Threshold calibration followed by the membership game.
pub fn run_threshold_attack(
    universe: &DataUniverse,
    n: usize,
    config: &ReleaseConfig,
    shadow_count: usize,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentResult> {
    let policy = calibrate_threshold(universe, n, config, shadow_count, master_seed)?;
    run_membership_experiment(universe, n, config, &policy, trials, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_universe, SyntheticSpec};
    use crate::model::{ModelKind, TrainingConfig};

    struct Oracle;
    impl Adversary for Oracle {
        fn decide(&self, c: &Challenge<'_>) -> bool {
            c.b
        }
    }

    struct CoinFlip;
    impl Adversary for CoinFlip {
        fn decide(&self, c: &Challenge<'_>) -> bool {
            seed::rng(seed::derive(c.seed, &[99])).random()
        }
    }

    fn universe(noise: f64) -> DataUniverse {
        synthetic_universe(&SyntheticSpec { records: 200, features: 3, noise_std: noise, coefficient_seed: 8 })
            .unwrap()
    }

    #[test]
    fn boundary_and_hand_loss() {
        let model = ModelParams::new(ModelKind::Linear { intercept: false }, 1, vec![2.0]).unwrap();
        // prediction 2 * 1.5 = 3, residual 0.5, loss 0.25
        let p = AdversaryPolicy::threshold(0.25).unwrap();
        assert!(threshold_decide(&p, &model, &[1.5], 2.5));
        assert!(!threshold_decide(&p, &model, &[1.5], 1e6));
        assert!(threshold_decide(&AdversaryPolicy::threshold(0.3).unwrap(), &model, &[1.5], 2.5));
        assert!(AdversaryPolicy::threshold(f64::INFINITY).is_err());
    }

    #[test]
    fn complement_sampling_is_uniform() {
        let members = [1, 2, 5];
        let mut counts = [0usize; 7];
        let mut rng = seed::rng(4);
        for _ in 0..40_000 {
            counts[sample_excluding_set(&mut rng, 7, &members)] += 1;
        }
        for m in members {
            assert_eq!(counts[m], 0);
        }
        for k in [0, 3, 4, 6] {
            assert!((counts[k] as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn oracle_and_coin_flip() {
        let u = universe(1.0);
        let cfg = ReleaseConfig::new(TrainingConfig::ridge(0.0));
        let oracle = run_membership_experiment(&u, 10, &cfg, &Oracle, 500, 1).unwrap();
        assert_eq!(oracle.advantage, 1.0);
        let coin = run_membership_experiment(&u, 10, &cfg, &CoinFlip, 10_000, 2).unwrap();
        assert!(coin.advantage <= 0.03, "{}", coin.advantage);
    }

    #[test]
    fn single_record_interpolation() {
        let u = universe(3.0);
        // the minimum-norm limit: a tiny ridge keeps the one-row system solvable
        let cfg = ReleaseConfig::new(TrainingConfig::ridge(1e-10));
        let policy = calibrate_threshold(&u, 1, &cfg, 20, 3).unwrap();
        // a single record is fitted exactly up to quantization
        assert!(policy.tau < 1e-8);
        let r = run_membership_experiment(&u, 1, &cfg, &policy, 2000, 3).unwrap();
        assert!(r.advantage >= 0.5, "{}", r.advantage);
    }

    #[test]
    fn tau_between_member_and_non_member_losses() {
        let u = universe(2.0);
        let cfg = ReleaseConfig::new(TrainingConfig::ridge(0.0));
        let p = calibrate_threshold(&u, 8, &cfg, 20, 6).unwrap();
        let r = run_membership_experiment(&u, 8, &cfg, &p, 4000, 6).unwrap();
        let pick = |b: bool| -> Vec<f64> { r.trials.iter().filter(|t| t.b == b).map(|t| t.loss).collect() };
        let (m, nm) = (stats::mean(&pick(true)), stats::mean(&pick(false)));
        assert!(m < nm);
        assert!(p.tau > 0.5 * m && p.tau < nm, "{m} {} {nm}", p.tau);
        assert_eq!(p, calibrate_threshold(&u, 8, &cfg, 20, 6).unwrap());
    }

    #[test]
    fn deterministic_and_flip_symmetric() {
        let u = universe(1.0);
        let cfg = ReleaseConfig::new(TrainingConfig::ridge(0.01));
        let a = run_threshold_attack(&u, 10, &cfg, 5, 300, 11).unwrap();
        assert_eq!(a, run_threshold_attack(&u, 10, &cfg, 5, 300, 11).unwrap());
        let flipped: Vec<MembershipTrial> =
            a.trials.iter().map(|t| MembershipTrial { b_hat: !t.b_hat, ..*t }).collect();
        let f = ExperimentResult::from_trials(flipped).unwrap();
        assert!((f.advantage - a.advantage).abs() < 1e-12);
        let parsed = ExperimentResult::parse_csv(&a.to_csv()).unwrap();
        assert_eq!(parsed.correct_fraction, a.correct_fraction);
        assert_eq!(parsed.advantage, a.advantage);
    }

    #[test]
    fn rejects_bad_sizes() {
        let u = universe(1.0);
        let cfg = ReleaseConfig::new(TrainingConfig::ridge(0.0));
        assert!(run_membership_experiment(&u, 0, &cfg, &Oracle, 10, 1).is_err());
        assert!(run_membership_experiment(&u, 200, &cfg, &Oracle, 10, 1).is_err());
        assert!(run_membership_experiment(&u, 10, &cfg, &Oracle, 0, 1).is_err());
    }
}
