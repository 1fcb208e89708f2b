//! Output perturbation with the Gaussian mechanism: neighbor sensitivity of
//! the trained parameters, noise calibration for an (epsilon, delta) budget,
//! and noise injection.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{check_subset_size, sample_mask, DataUniverse};
use crate::error::{Error, Result};
use crate::model::{train, ModelParams, TrainingConfig};
use crate::seed;

/// An (epsilon, delta) differential-privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    epsilon: f64,
    delta: f64,
}

impl DpBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Budget(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Budget(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The classical Gaussian-mechanism guarantee is stated for epsilon <= 1.
    pub fn within_classical_range(&self) -> bool {
        self.epsilon <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityMethod {
    Exhaustive,
    Sampled,
}

/// Empirical maximum of `|theta(mask) - theta(mask')|_2` over evaluated
/// neighbor pairs. Always a lower bound on the true supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    pub delta_theta: f64,
    pub pairs_evaluated: usize,
    pub method: SensitivityMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityMode {
    /// Every n-subset of the universe paired with every single-record swap.
    Exhaustive,
    /// `pairs` random (mask, swap) draws.
    Sampled { pairs: usize, seed: u64 },
}

/// Upper limit on masks enumerated by [`SensitivityMode::Exhaustive`].
pub const EXHAUSTIVE_MASK_LIMIT: u64 = 1_000_000;

fn distance(a: &ModelParams, b: &ModelParams) -> f64 {
    a.theta
        .iter()
        .zip(&b.theta)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn members_of(bits: u64) -> Vec<usize> {
    (0..64).filter(|i| bits >> i & 1 == 1).collect()
}

/// Estimates the l2 sensitivity of the trained parameters to swapping one
/// member for one non-member (both masks keep exactly `n` members).
pub fn neighbor_sensitivity(
    universe: &DataUniverse,
    n: usize,
    config: &TrainingConfig,
    mode: SensitivityMode,
) -> Result<SensitivityEstimate> {
    if !config.model.is_deterministic() {
        return Err(Error::UnsupportedModel(
            "neighbor sensitivity needs a deterministic trainer (ridge)".into(),
        ));
    }
    let big_n = universe.len();
    check_subset_size(big_n, n)?;
    match mode {
        SensitivityMode::Exhaustive => exhaustive(universe, n, config),
        SensitivityMode::Sampled { pairs, seed } => sampled(universe, n, config, pairs, seed),
    }
}

fn exhaustive(universe: &DataUniverse, n: usize, config: &TrainingConfig) -> Result<SensitivityEstimate> {
    let big_n = universe.len();
    if big_n > 63 || binomial(big_n as u64, n as u64) > EXHAUSTIVE_MASK_LIMIT {
        return Err(Error::Range(format!(
            "exhaustive enumeration of {n}-of-{big_n} masks exceeds {EXHAUSTIVE_MASK_LIMIT}"
        )));
    }
    // Gosper's hack over all n-bit subsets of N bits.
    let mut trained: HashMap<u64, ModelParams> = HashMap::new();
    let limit = 1u64 << big_n;
    let mut bits = (1u64 << n) - 1;
    while bits < limit {
        trained.insert(bits, train(universe, &members_of(bits), config, 0)?);
        let c = bits & bits.wrapping_neg();
        let r = bits + c;
        bits = (((r ^ bits) >> 2) / c) | r;
    }
    let mut best: f64 = 0.0;
    let mut pairs = 0;
    let mut keys: Vec<u64> = trained.keys().copied().collect();
    keys.sort_unstable();
    for &mask in &keys {
        let theta = &trained[&mask];
        for out in (0..big_n).filter(|i| mask >> i & 1 == 1) {
            for inn in (0..big_n).filter(|i| mask >> i & 1 == 0) {
                let neighbor = (mask & !(1 << out)) | (1 << inn);
                if neighbor > mask {
                    best = best.max(distance(theta, &trained[&neighbor]));
                    pairs += 1;
                }
            }
        }
    }
    Ok(SensitivityEstimate {
        delta_theta: best,
        pairs_evaluated: pairs,
        method: SensitivityMethod::Exhaustive,
    })
}

fn sampled(
    universe: &DataUniverse,
    n: usize,
    config: &TrainingConfig,
    pairs: usize,
    master: u64,
) -> Result<SensitivityEstimate> {
    if pairs == 0 {
        return Err(Error::Range("sampled sensitivity needs at least one pair".into()));
    }
    let big_n = universe.len();
    let mut best: f64 = 0.0;
    for k in 0..pairs as u64 {
        let mask = sample_mask(big_n, n, seed::derive(master, &[seed::tag::SENSITIVITY, k, 0]))?;
        let mut rng = seed::derived_rng(master, &[seed::tag::SENSITIVITY, k, 1]);
        let members = mask.members();
        let out_pos = rng.random_range(0..members.len());
        let outsiders: Vec<usize> = mask.non_members().collect();
        let inn = outsiders[rng.random_range(0..outsiders.len())];
        let mut swapped = members.to_vec();
        swapped[out_pos] = inn;
        swapped.sort_unstable();
        let a = train(universe, members, config, 0)?;
        let b = train(universe, &swapped, config, 0)?;
        best = best.max(distance(&a, &b));
    }
    Ok(SensitivityEstimate {
        delta_theta: best,
        pairs_evaluated: pairs,
        method: SensitivityMethod::Sampled,
    })
}

/// Noise scale `sqrt(2 ln(1.25 / delta)) * delta_theta / epsilon`.
pub fn gaussian_mechanism_sigma(delta_theta: f64, budget: &DpBudget) -> Result<f64> {
    if !(delta_theta >= 0.0 && delta_theta.is_finite()) {
        return Err(Error::Range(format!(
            "sensitivity must be finite and >= 0, got {delta_theta}"
        )));
    }
    Ok((2.0 * (1.25 / budget.delta).ln()).sqrt() * delta_theta / budget.epsilon)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every coordinate.
pub fn add_noise(params: &ModelParams, sigma: f64, seed: u64) -> Result<ModelParams> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Range(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = params.clone();
    out.provenance.sigma = sigma;
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    for t in out.theta.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *t += sigma * z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, MlpConfig};

    fn lin(theta: Vec<f64>) -> ModelParams {
        let n = theta.len();
        ModelParams::new(ModelKind::Linear { intercept: false }, n, theta).unwrap()
    }

    #[test]
    fn budget_validation() {
        assert!(DpBudget::new(0.0, 0.1).is_err());
        assert!(DpBudget::new(1.0, 0.0).is_err());
        assert!(DpBudget::new(1.0, 1.0).is_err());
        assert!(DpBudget::new(2.0, 0.1).unwrap().within_classical_range() == false);
        assert!(DpBudget::new(0.5, 0.1).unwrap().within_classical_range());
    }

    #[test]
    fn sigma_closed_form() {
        let b = DpBudget::new(1.0, 0.05).unwrap();
        let s = gaussian_mechanism_sigma(1.0, &b).unwrap();
        assert!((s - (2.0 * 25f64.ln()).sqrt()).abs() < 1e-12);
        assert!((s - 2.537_272_482_359_039).abs() < 1e-12);
        let b2 = DpBudget::new(2.0, 0.05).unwrap();
        assert_eq!(gaussian_mechanism_sigma(1.0, &b2).unwrap(), s / 2.0);
        assert_eq!(gaussian_mechanism_sigma(0.0, &b).unwrap(), 0.0);
        assert!(gaussian_mechanism_sigma(-1.0, &b).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let p = lin(vec![1.0, -2.0]);
        let q = add_noise(&p, 0.0, 4).unwrap();
        assert_eq!(q.theta, p.theta);
        assert!(add_noise(&p, -0.1, 4).is_err());
    }

    #[test]
    fn noise_moments_and_determinism() {
        let sigma = 0.7;
        let p = lin(vec![0.0; 10_000]);
        let q = add_noise(&p, sigma, 8).unwrap();
        assert_eq!(q, add_noise(&p, sigma, 8).unwrap());
        let m = crate::stats::mean(&q.theta);
        assert!(m.abs() <= 4.0 * sigma / 100.0);
        let v = crate::stats::sample_variance(&q.theta);
        assert!((v - sigma * sigma).abs() <= 0.05 * sigma * sigma);
    }

    #[test]
    fn identical_records_have_zero_sensitivity() {
        let u = DataUniverse::from_rows(&vec![vec![1.0, 2.0]; 6], vec![0.5; 6]).unwrap();
        let est = neighbor_sensitivity(&u, 3, &TrainingConfig::ridge(0.1), SensitivityMode::Exhaustive).unwrap();
        assert_eq!(est.delta_theta, 0.0);
        // C(6,3) * 3 * 3 / 2 unordered neighbor pairs
        assert_eq!(est.pairs_evaluated, 90);
    }

    #[test]
    fn mlp_is_rejected() {
        let u = DataUniverse::from_rows(&vec![vec![1.0]; 4], vec![0.0; 4]).unwrap();
        let r = neighbor_sensitivity(
            &u,
            2,
            &TrainingConfig::mlp(0.0, MlpConfig::default()),
            SensitivityMode::Sampled { pairs: 3, seed: 1 },
        );
        assert!(matches!(r, Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn four_records_match_brute_force() {
        // Oracle: all 6 two-record masks, every pair of masks sharing exactly one record.
        let rows = vec![vec![1.0, 0.2], vec![-0.5, 1.0], vec![2.0, -1.0], vec![0.3, 0.3]];
        let u = DataUniverse::from_rows(&rows, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let cfg = TrainingConfig::ridge(0.1);
        let subsets: Vec<Vec<usize>> = vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]];
        let mut brute: f64 = 0.0;
        for a in &subsets {
            for b in &subsets {
                let shared = a.iter().filter(|x| b.contains(x)).count();
                if shared == 1 {
                    let ta = train(&u, a, &cfg, 0).unwrap();
                    let tb = train(&u, b, &cfg, 0).unwrap();
                    brute = brute.max(distance(&ta, &tb));
                }
            }
        }
        let est = neighbor_sensitivity(&u, 2, &cfg, SensitivityMode::Exhaustive).unwrap();
        assert_eq!(est.delta_theta, brute);
        let sampled = neighbor_sensitivity(&u, 2, &cfg, SensitivityMode::Sampled { pairs: 50, seed: 3 }).unwrap();
        assert!(sampled.delta_theta <= est.delta_theta);
        assert_eq!(sampled.method, SensitivityMethod::Sampled);
    }

    #[test]
    fn exhaustive_limit() {
        let u = DataUniverse::from_rows(&vec![vec![1.0]; 70], vec![0.0; 70]).unwrap();
        assert!(neighbor_sensitivity(&u, 3, &TrainingConfig::ridge(1.0), SensitivityMode::Exhaustive).is_err());
    }
}
