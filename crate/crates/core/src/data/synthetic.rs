use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataUniverse;
use crate::error::{Error, Result};
use crate::seed;

/// Parameters of a synthetic linear-Gaussian universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub records: usize,
    pub features: usize,
    pub noise_std: f64,
    pub coefficient_seed: u64,
}

impl SyntheticSpec {
    /// Coefficient vector used for the labels.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut rng = seed::derived_rng(self.coefficient_seed, &[0]);
        (0..self.features)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

/// Features i.i.d. standard normal, labels `x . beta + noise_std * N(0, 1)`.
pub fn synthetic_universe(spec: &SyntheticSpec) -> Result<DataUniverse> {
    if spec.records < 4 || spec.features == 0 {
        return Err(Error::Config(format!(
            "synthetic universe needs N >= 4 and p_x >= 1, got N={}, p_x={}",
            spec.records, spec.features
        )));
    }
    if !(spec.noise_std >= 0.0 && spec.noise_std.is_finite()) {
        return Err(Error::Config(format!(
            "noise_std must be finite and nonnegative, got {}",
            spec.noise_std
        )));
    }
    let beta = spec.coefficients();
    let mut rng = seed::derived_rng(spec.coefficient_seed, &[1]);
    let mut features = Vec::with_capacity(spec.records * spec.features);
    let mut labels = Vec::with_capacity(spec.records);
    for _ in 0..spec.records {
        let mut y = 0.0;
        for b in &beta {
            let x: f64 = StandardNormal.sample(&mut rng);
            y += x * b;
            features.push(x);
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        labels.push(y + spec.noise_std * e);
    }
    DataUniverse::new(features, labels, spec.features)
}
