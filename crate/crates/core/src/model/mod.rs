//! Regularized empirical-risk training: closed-form ridge regression, a small
//! tanh MLP trained by gradient descent, projection onto a finite parameter
//! grid, and empirical model sensitivity.
//!
//! The fitness of `theta` on a training set `D` is
//!
//! ```text
//! f(theta, D) = lambda * theta'theta + (1/|D|) * sum_{(x,y) in D} loss_scale * (M(x; theta) - y)^2
//! ```

mod linear;
mod mlp;
mod params;
mod quantize;

use serde::{Deserialize, Serialize};

use crate::data::DataUniverse;
use crate::error::{Error, Result};
use crate::seed;

pub use linear::train_ridge;
pub use mlp::{train_mlp, MlpConfig};
pub use params::{mask_digest, ModelKind, ModelParams, Provenance};
pub use quantize::{quantize, QuantizationGrid};

/// Which model family to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Linear {
        #[serde(default)]
        intercept: bool,
    },
    Mlp(MlpConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Linear { intercept } => ModelKind::Linear {
                intercept: *intercept,
            },
            ModelSpec::Mlp(m) => ModelKind::Mlp {
                hidden: m.hidden.clone(),
            },
        }
    }

    /// Training is a deterministic function of the dataset (no seed dependence).
    pub fn is_deterministic(&self) -> bool {
        matches!(self, ModelSpec::Linear { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Regularization weight; `g(theta) = theta'theta`.
    pub lambda: f64,
    /// Multiplies the per-example loss. Zero makes training data-independent.
    #[serde(default = "default_loss_scale")]
    pub loss_scale: f64,
    pub model: ModelSpec,
}

fn default_loss_scale() -> f64 {
    1.0
}

impl TrainingConfig {
    pub fn ridge(lambda: f64) -> Self {
        Self {
            lambda,
            loss_scale: 1.0,
            model: ModelSpec::Linear { intercept: false },
        }
    }

    pub fn mlp(lambda: f64, mlp: MlpConfig) -> Self {
        Self {
            lambda,
            loss_scale: 1.0,
            model: ModelSpec::Mlp(mlp),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.loss_scale >= 0.0 && self.loss_scale.is_finite()) {
            return Err(Error::Config(format!(
                "loss_scale must be >= 0, got {}",
                self.loss_scale
            )));
        }
        if let ModelSpec::Mlp(m) = &self.model {
            if m.epochs == 0 || !(m.step_size > 0.0) || m.batch_size == Some(0) {
                return Err(Error::Config(
                    "MLP needs epochs >= 1, step_size > 0 and a positive batch size".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Regularized empirical risk of `theta` on the records `members`.
pub fn fitness(
    theta: &ModelParams,
    universe: &DataUniverse,
    members: &[usize],
    config: &TrainingConfig,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let reg: f64 = theta.theta.iter().map(|t| t * t).sum();
    let losses: Vec<f64> = members
        .iter()
        .map(|&i| theta.loss(universe.features(i), universe.label(i), config.loss_scale))
        .collect();
    Ok(config.lambda * reg + crate::stats::mean(&losses))
}

/// Gradient of [`fitness`] with respect to `theta`.
pub fn fitness_gradient(
    theta: &ModelParams,
    universe: &DataUniverse,
    members: &[usize],
    config: &TrainingConfig,
) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let w = 1.0 / members.len() as f64;
    let mut grad: Vec<f64> = theta.theta.iter().map(|t| 2.0 * config.lambda * t).collect();
    for &i in members {
        let g = theta.loss_gradient(universe.features(i), universe.label(i), config.loss_scale);
        for (a, b) in grad.iter_mut().zip(g) {
            *a += w * b;
        }
    }
    Ok(grad)
}

/// Trains the continuous optimizer on `members`; `seed` only matters for the MLP.
pub fn train(
    universe: &DataUniverse,
    members: &[usize],
    config: &TrainingConfig,
    seed: u64,
) -> Result<ModelParams> {
    let params = match &config.model {
        ModelSpec::Linear { intercept } => train_ridge(universe, members, config, *intercept)?,
        ModelSpec::Mlp(m) => train_mlp(universe, members, config, m, seed)?,
    };
    Ok(params.with_provenance(Provenance {
        seed,
        mask_digest: mask_digest(members),
        sigma: 0.0,
    }))
}

/// What the adversary sees: trained, optionally perturbed with Gaussian
/// noise, then projected onto the finite grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseConfig {
    pub training: TrainingConfig,
    #[serde(default)]
    pub grid: QuantizationGrid,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl ReleaseConfig {
    pub fn new(training: TrainingConfig) -> Self {
        Self {
            training,
            grid: QuantizationGrid::default(),
            noise_sigma: 0.0,
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_grid(mut self, grid: QuantizationGrid) -> Self {
        self.grid = grid;
        self
    }
}

/// Train, add noise (before quantization), quantize.
pub fn release(
    universe: &DataUniverse,
    members: &[usize],
    config: &ReleaseConfig,
    trial_seed: u64,
) -> Result<ModelParams> {
    let trained = train(
        universe,
        members,
        &config.training,
        seed::derive(trial_seed, &[seed::tag::TRAIN]),
    )?;
    let noisy = crate::privacy::add_noise(
        &trained,
        config.noise_sigma,
        seed::derive(trial_seed, &[seed::tag::NOISE]),
    )?;
    quantize(&noisy, &config.grid)
}

/// Largest per-example loss-gradient norm over `probe` records and the
/// parameter samples. An empirical lower bound on the supremum sensitivity.
pub fn model_sensitivity(
    config: &TrainingConfig,
    universe: &DataUniverse,
    theta_samples: &[ModelParams],
    probe: &[usize],
) -> Result<f64> {
    if theta_samples.is_empty() || probe.is_empty() {
        return Err(Error::Range(
            "sensitivity needs at least one parameter sample and one probe record".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for theta in theta_samples {
        for &id in probe {
            let g = theta.loss_gradient(universe.features(id), universe.label(id), config.loss_scale);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!("loss gradient at record {id} is not finite")));
            }
            best = best.max(norm);
        }
    }
    Ok(best)
}
