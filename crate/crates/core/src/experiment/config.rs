use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{apply_pca, fit_pca, load_adult_csv, synthetic_universe, AdultSchema, DataUniverse, PcaOptions, SyntheticSpec};
use crate::error::{Error, Result};
use crate::leakage::LeakageConfig;
use crate::model::{ModelSpec, QuantizationGrid, ReleaseConfig, TrainingConfig};
use crate::privacy::{gaussian_mechanism_sigma, neighbor_sensitivity, DpBudget, SensitivityMode};
use crate::seed;

/// Where the record universe comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    /// Adult-layout files, concatenated, projected on the top principal components.
    Adult {
        paths: Vec<PathBuf>,
        #[serde(default = "yes")]
        standardize: bool,
    },
    /// A universe CSV as written by `DataUniverse::write_csv`.
    Csv { path: PathBuf },
}

fn yes() -> bool {
    true
}

impl DatasetSpec {
    /// Loads the universe with (at least) `p_x` features; narrower universes
    /// are the leading columns of this one.
    pub fn load(&self, p_x: usize) -> Result<DataUniverse> {
        match self {
            DatasetSpec::Synthetic(spec) => {
                if p_x > spec.features {
                    return Err(Error::Config(format!(
                        "synthetic universe has {} features, {p_x} requested",
                        spec.features
                    )));
                }
                synthetic_universe(spec)
            }
            DatasetSpec::Adult { paths, standardize } => {
                let adult = load_adult_csv(paths, &AdultSchema::standard())?;
                let pca = fit_pca(&adult.universe, p_x, PcaOptions { standardize: *standardize })?;
                apply_pca(&pca, &adult.universe)
            }
            DatasetSpec::Csv { path } => {
                let u = DataUniverse::read_csv(path)?;
                if p_x > u.n_features() {
                    return Err(Error::Config(format!(
                        "{} has {} features, {p_x} requested",
                        path.display(),
                        u.n_features()
                    )));
                }
                Ok(u)
            }
        }
    }
}

/// The knobs a sweep can turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    N,
    Lambda,
    PX,
    Sigma,
    LossScale,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::N => "n",
            SweepVar::Lambda => "lambda",
            SweepVar::PX => "p_x",
            SweepVar::Sigma => "sigma",
            SweepVar::LossScale => "loss_scale",
        }
    }

    /// Whether grid values must be whole numbers.
    fn integral(self) -> bool {
        matches!(self, SweepVar::N | SweepVar::PX)
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "n" => SweepVar::N,
            "lambda" => SweepVar::Lambda,
            "p_x" => SweepVar::PX,
            "sigma" => SweepVar::Sigma,
            "loss_scale" => SweepVar::LossScale,
            _ => return Err(Error::Config(format!("unknown sweep variable {s:?}"))),
        })
    }
}

/// Values held fixed while one of them is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub n: usize,
    pub lambda: f64,
    pub p_x: usize,
    pub sigma: f64,
    pub loss_scale: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n: 10,
            lambda: 0.0,
            p_x: 5,
            sigma: 0.0,
            loss_scale: 1.0,
        }
    }
}

impl Params {
    pub fn with(mut self, var: SweepVar, value: f64) -> Self {
        match var {
            SweepVar::N => self.n = value as usize,
            SweepVar::Lambda => self.lambda = value,
            SweepVar::PX => self.p_x = value as usize,
            SweepVar::Sigma => self.sigma = value,
            SweepVar::LossScale => self.loss_scale = value,
        }
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p_x == 0 {
            return Err(Error::Config("n and p_x must be at least 1".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("sigma", self.sigma), ("loss_scale", self.loss_scale)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Noise calibrated from an (epsilon, delta) budget instead of a fixed sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub epsilon: f64,
    pub delta: f64,
    /// Random neighbor pairs for the sensitivity estimate; `None` enumerates
    /// every pair (small universes only).
    #[serde(default)]
    pub sensitivity_pairs: Option<usize>,
    /// Accept epsilon > 1, outside the range of the classical guarantee.
    #[serde(default)]
    pub allow_large_epsilon: bool,
}

impl PrivacySpec {
    pub fn budget(&self) -> Result<DpBudget> {
        let b = DpBudget::new(self.epsilon, self.delta)?;
        if !b.within_classical_range() && !self.allow_large_epsilon {
            return Err(Error::Budget(format!(
                "epsilon = {} > 1 is outside the Gaussian-mechanism guarantee; pass allow_large_epsilon to proceed",
                self.epsilon
            )));
        }
        Ok(b)
    }
}

fn default_attack_trials() -> usize {
    2000
}

fn default_shadow_count() -> usize {
    20
}

fn default_model() -> ModelSpec {
    ModelSpec::Linear { intercept: false }
}

/// Everything needed to run leakage estimation and the membership game once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub leakage: LeakageConfig,
    #[serde(default = "yes")]
    pub estimate_leakage: bool,
    #[serde(default = "default_attack_trials")]
    pub attack_trials: usize,
    #[serde(default = "default_shadow_count")]
    pub shadow_count: usize,
    #[serde(default)]
    pub quantization: QuantizationGrid,
    #[serde(default)]
    pub privacy: Option<PrivacySpec>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        Self {
            dataset: DatasetSpec::Synthetic(spec),
            model: default_model(),
            params: Params::default(),
            leakage: LeakageConfig::default(),
            estimate_leakage: true,
            attack_trials: default_attack_trials(),
            shadow_count: default_shadow_count(),
            quantization: QuantizationGrid::default(),
            privacy: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.attack_trials == 0 || self.shadow_count == 0 {
            return Err(Error::Config("attack_trials and shadow_count must be at least 1".into()));
        }
        if self.estimate_leakage && (self.leakage.trials < 2 || self.leakage.probe_size == 0) {
            return Err(Error::Config("leakage needs trials >= 2 and probe_size >= 1".into()));
        }
        if let Some(p) = &self.privacy {
            p.budget()?;
            if self.params.sigma != 0.0 {
                return Err(Error::Config(
                    "give either a privacy budget or a fixed sigma, not both".into(),
                ));
            }
            if !self.model.is_deterministic() {
                return Err(Error::Config("budget calibration needs the linear model".into()));
            }
        }
        self.training(&self.params).validate()
    }

    pub fn training(&self, params: &Params) -> TrainingConfig {
        TrainingConfig {
            lambda: params.lambda,
            loss_scale: params.loss_scale,
            model: self.model.clone(),
        }
    }

    /// Release pipeline for `params` on `universe`; with a privacy budget the
    /// noise scale comes from the estimated neighbor sensitivity.
    pub fn release_config(&self, params: &Params, universe: &DataUniverse) -> Result<ReleaseConfig> {
        let training = self.training(params);
        let sigma = match &self.privacy {
            None => params.sigma,
            Some(p) => {
                let mode = match p.sensitivity_pairs {
                    Some(pairs) => SensitivityMode::Sampled {
                        pairs,
                        seed: seed::derive(self.seed, &[seed::tag::SENSITIVITY]),
                    },
                    None => SensitivityMode::Exhaustive,
                };
                let s = neighbor_sensitivity(universe, params.n, &training, mode)?;
                gaussian_mechanism_sigma(s.delta_theta, &p.budget()?)?
            }
        };
        Ok(ReleaseConfig::new(training)
            .with_grid(self.quantization.clone())
            .with_noise(sigma))
    }
}

fn default_seed_count() -> usize {
    5
}

/// One-variable sweep over a grid, repeated over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: ExperimentConfig,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        Ok(hex::encode(&Sha256::digest(canonical.as_bytes())[..8]))
    }

    /// Checks everything that can be checked before loading data or training.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep grid must be strictly increasing".into()));
        }
        if self.seed_count == 0 {
            return Err(Error::Config("seed_count must be at least 1".into()));
        }
        if self.sweep == SweepVar::Sigma && self.base.privacy.is_some() {
            return Err(Error::Config(
                "a sigma sweep conflicts with budget-calibrated noise".into(),
            ));
        }
        for &v in &self.grid {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{} grid value {v} is invalid", self.sweep)));
            }
            if self.sweep.integral() && (v.fract() != 0.0 || v < 1.0) {
                return Err(Error::Config(format!("{} grid value {v} must be a positive integer", self.sweep)));
            }
        }
        let mut probe = self.base.clone();
        for &v in &self.grid {
            probe.params = self.base.params.with(self.sweep, v);
            probe.validate()?;
        }
        Ok(())
    }

    /// Parameter set at every grid point.
    pub fn points(&self) -> Vec<Params> {
        self.grid.iter().map(|&v| self.base.params.with(self.sweep, v)).collect()
    }

    /// Largest feature count the sweep needs.
    pub fn max_p_x(&self) -> usize {
        self.points().iter().map(|p| p.p_x).max().unwrap_or(self.base.params.p_x)
    }

    /// Seed shared by every grid point for repetition `k`.
    pub fn repetition_seed(&self, k: usize) -> u64 {
        seed::derive(self.base.seed, &[seed::tag::SWEEP, k as u64])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SweepConfig {
        SweepConfig {
            base: ExperimentConfig::synthetic(SyntheticSpec {
                records: 100,
                features: 5,
                noise_std: 1.0,
                coefficient_seed: 1,
            }),
            sweep: SweepVar::N,
            grid: vec![10.0, 20.0],
            seed_count: 2,
        }
    }

    #[test]
    fn json_round_trip_and_hash() {
        let c = base();
        let back = SweepConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        let mut d = c.clone();
        d.base.seed = 1;
        assert_ne!(d.hash().unwrap(), c.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 16);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let c = SweepConfig::from_json(
            r#"{"dataset": {"kind": "synthetic", "records": 50, "features": 3, "noise_std": 1.0, "coefficient_seed": 0},
                "params": {"p_x": 3}, "sweep": "lambda", "grid": [0, 1]}"#,
        )
        .unwrap();
        assert_eq!(c.seed_count, 5);
        assert_eq!(c.base.shadow_count, 20);
        assert_eq!(c.base.params.n, 10);
        assert_eq!(c.points()[1].lambda, 1.0);
    }

    #[test]
    fn rejects_conflicts_before_work() {
        let mut c = base();
        c.grid = vec![20.0, 10.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.grid = vec![];
        assert!(c.validate().is_err());
        c.grid = vec![1.5];
        assert!(c.validate().is_err());
        let mut c = base();
        c.sweep = SweepVar::Sigma;
        c.grid = vec![0.0, 1.0];
        c.base.privacy = Some(PrivacySpec { epsilon: 1.0, delta: 1e-5, sensitivity_pairs: Some(10), allow_large_epsilon: false });
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = base();
        c.base.privacy = Some(PrivacySpec { epsilon: 4.0, delta: 1e-5, sensitivity_pairs: Some(10), allow_large_epsilon: false });
        assert!(matches!(c.validate(), Err(Error::Budget(_))));
        c.base.privacy.as_mut().unwrap().allow_large_epsilon = true;
        assert!(c.validate().is_ok());
        assert!("rho".parse::<SweepVar>().is_err());
        assert_eq!("p_x".parse::<SweepVar>().unwrap(), SweepVar::PX);
    }

    #[test]
    fn budget_sets_sigma() {
        let mut c = base().base;
        c.privacy = Some(PrivacySpec { epsilon: 1.0, delta: 0.05, sensitivity_pairs: Some(50), allow_large_epsilon: false });
        let u = c.dataset.load(5).unwrap();
        let r = c.release_config(&c.params, &u).unwrap();
        assert!(r.noise_sigma > 0.0);
        let mut loose = c.clone();
        loose.privacy.as_mut().unwrap().epsilon = 0.5;
        let r2 = loose.release_config(&loose.params, &u).unwrap();
        assert!((r2.noise_sigma - 2.0 * r.noise_sigma).abs() < 1e-12 * r.noise_sigma);
    }
}
