use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::mlp::MlpLayout;

/// Architecture of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelKind {
    /// `theta . x`, with a trailing bias coordinate when `intercept` is set.
    Linear { intercept: bool },
    /// Fully connected tanh network with one linear output.
    Mlp { hidden: Vec<usize> },
}

impl ModelKind {
    pub fn param_count(&self, inputs: usize) -> usize {
        match self {
            ModelKind::Linear { intercept } => inputs + usize::from(*intercept),
            ModelKind::Mlp { hidden } => MlpLayout::new(inputs, hidden).param_count(),
        }
    }
}

/// Where a parameter vector came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub seed: u64,
    pub mask_digest: String,
    pub sigma: f64,
}

/// A trained parameter vector, continuous or quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub inputs: usize,
    pub theta: Vec<f64>,
    pub provenance: Provenance,
}

impl ModelParams {
    pub fn new(kind: ModelKind, inputs: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = kind.param_count(inputs);
        if theta.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: theta.len(),
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("parameter vector has non-finite entries".into()));
        }
        Ok(Self {
            kind,
            inputs,
            theta,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Linear { intercept } => {
                let dot: f64 = self.theta.iter().zip(x).map(|(t, v)| t * v).sum();
                if *intercept {
                    dot + self.theta[self.inputs]
                } else {
                    dot
                }
            }
            ModelKind::Mlp { hidden } => MlpLayout::new(self.inputs, hidden).predict(&self.theta, x),
        }
    }

    /// Per-example loss `loss_scale * (M(x; theta) - y)^2`.
    pub fn loss(&self, x: &[f64], y: f64, loss_scale: f64) -> f64 {
        let r = self.predict(x) - y;
        loss_scale * r * r
    }

    /// Gradient of [`ModelParams::loss`] with respect to `theta`.
    pub fn loss_gradient(&self, x: &[f64], y: f64, loss_scale: f64) -> Vec<f64> {
        let mut grad = vec![0.0; self.theta.len()];
        match &self.kind {
            ModelKind::Linear { intercept } => {
                let g = 2.0 * loss_scale * (self.predict(x) - y);
                for (gi, xi) in grad.iter_mut().zip(x) {
                    *gi = g * xi;
                }
                if *intercept {
                    grad[self.inputs] = g;
                }
            }
            ModelKind::Mlp { hidden } => {
                let layout = MlpLayout::new(self.inputs, hidden);
                let mut scratch = layout.scratch();
                layout.accumulate_gradient(&self.theta, x, y, loss_scale, 1.0, &mut grad, &mut scratch);
            }
        }
        grad
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ModelParams = serde_json::from_str(text)?;
        let checked = ModelParams::new(p.kind, p.inputs, p.theta)?;
        Ok(checked.with_provenance(p.provenance))
    }
}

/// Short content digest of a member list.
pub fn mask_digest(members: &[usize]) -> String {
    let mut h = Sha256::new();
    for m in members {
        h.update((*m as u64).to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}
