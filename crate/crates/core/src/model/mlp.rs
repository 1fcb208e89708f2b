//! Small fully connected tanh network with a scalar linear output.
//!
//! Parameters are flattened layer by layer: the weight matrix (row-major,
//! `out x in`) followed by the bias vector.

use rand::Rng;

use crate::data::DataUniverse;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, TrainingConfig};
use crate::seed;

#[derive(Debug, Clone)]
pub(crate) struct MlpLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

pub(crate) struct Scratch {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpLayout {
    pub fn new(inputs: usize, hidden: &[usize]) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(inputs);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let offsets = sizes
            .windows(2)
            .scan(0, |off, w| {
                let start = *off;
                *off += w[1] * (w[0] + 1);
                Some(start)
            })
            .collect();
        Self { sizes, offsets }
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            activations: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: self.sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn forward(&self, theta: &[f64], x: &[f64], acts: &mut [Vec<f64>]) {
        acts[0].copy_from_slice(x);
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = theta[self.offsets[l]..].split_at(fan_in * fan_out);
            let b = &rest[..fan_out];
            let (prev, next) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            for (j, out) in next[0].iter_mut().enumerate() {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                *out = if l + 1 < layers { z.tanh() } else { z };
            }
        }
    }

    pub fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        let mut s = self.scratch();
        self.forward(theta, x, &mut s.activations);
        s.activations[self.sizes.len() - 1][0]
    }

    /// Adds `weight * d/dtheta [loss_scale * (out - y)^2]` into `grad` and
    /// returns the unweighted loss.
    pub fn accumulate_gradient(
        &self,
        theta: &[f64],
        x: &[f64],
        y: f64,
        loss_scale: f64,
        weight: f64,
        grad: &mut [f64],
        s: &mut Scratch,
    ) -> f64 {
        self.forward(theta, x, &mut s.activations);
        let layers = self.sizes.len() - 1;
        let out = s.activations[layers][0];
        let r = out - y;
        s.deltas[layers][0] = 2.0 * loss_scale * r * weight;

        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = self.offsets[l];
            let input = &s.activations[l];
            {
                let delta = &s.deltas[l + 1];
                for j in 0..fan_out {
                    let d = delta[j];
                    let row = &mut grad[base + j * fan_in..base + (j + 1) * fan_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                    grad[base + fan_in * fan_out + j] += d;
                }
            }
            if l > 0 {
                let w = &theta[base..base + fan_in * fan_out];
                let (lower, upper) = s.deltas.split_at_mut(l + 1);
                let delta = &upper[0];
                for (i, dl) in lower[l].iter_mut().enumerate() {
                    let back: f64 = (0..fan_out).map(|j| w[j * fan_in + i] * delta[j]).sum();
                    let a = s.activations[l][i];
                    *dl = back * (1.0 - a * a);
                }
            }
        }
        loss_scale * r * r
    }
}

/// Hyperparameters for gradient-descent training of the MLP.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub step_size: f64,
    /// Minibatch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![8, 8],
            epochs: 200,
            step_size: 0.05,
            batch_size: None,
        }
    }
}

/// Mean per-example loss and gradient of the full fitness over `ids`.
pub(crate) fn fitness_and_gradient(
    layout: &MlpLayout,
    theta: &[f64],
    universe: &DataUniverse,
    ids: &[usize],
    config: &TrainingConfig,
    grad: &mut [f64],
    scratch: &mut Scratch,
) -> f64 {
    grad.iter_mut()
        .zip(theta)
        .for_each(|(g, t)| *g = 2.0 * config.lambda * t);
    let w = 1.0 / ids.len() as f64;
    let mut loss = 0.0;
    for &id in ids {
        loss += layout.accumulate_gradient(
            theta,
            universe.features(id),
            universe.label(id),
            config.loss_scale,
            w,
            grad,
            scratch,
        );
    }
    config.lambda * theta.iter().map(|t| t * t).sum::<f64>() + loss * w
}

pub(crate) fn initial_theta(layout: &MlpLayout, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let mut theta = Vec::with_capacity(layout.param_count());
    for w in layout.sizes.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..w[1] * (w[0] + 1) {
            theta.push(rng.random_range(-bound..=bound));
        }
    }
    theta
}

/// Trains the MLP by (minibatch) gradient descent on the regularized fitness.
pub fn train_mlp(
    universe: &DataUniverse,
    members: &[usize],
    config: &TrainingConfig,
    mlp: &MlpConfig,
    seed: u64,
) -> Result<ModelParams> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if mlp.epochs == 0 {
        return Err(Error::Config("MLP training needs at least one epoch".into()));
    }
    let layout = MlpLayout::new(universe.n_features(), &mlp.hidden);
    let mut theta = initial_theta(&layout, seed::derive(seed, &[0]));
    let mut grad = vec![0.0; theta.len()];
    let mut scratch = layout.scratch();
    let mut order = members.to_vec();
    let mut rng = seed::derived_rng(seed, &[1]);
    let batch = mlp.batch_size.unwrap_or(members.len()).clamp(1, members.len());

    for epoch in 0..mlp.epochs {
        if batch < members.len() {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let f = fitness_and_gradient(&layout, &theta, universe, chunk, config, &mut grad, &mut scratch);
            if !f.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= mlp.step_size * g;
            }
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Divergence { epoch: mlp.epochs });
    }
    ModelParams::new(
        ModelKind::Mlp {
            hidden: mlp.hidden.clone(),
        },
        universe.n_features(),
        theta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fitness, fitness_gradient, ModelSpec};

    fn fixture() -> DataUniverse {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 - 6.0) / 3.0, ((i * 7) % 5) as f64 / 2.0 - 1.0])
            .collect();
        let labels = rows.iter().map(|r| if r[0] + 0.3 * r[1] > 0.0 { 1.0 } else { 0.0 }).collect();
        DataUniverse::from_rows(&rows, labels).unwrap()
    }

    fn config(lambda: f64) -> (TrainingConfig, MlpConfig) {
        let mlp = MlpConfig { hidden: vec![4, 3], epochs: 400, step_size: 0.1, batch_size: None };
        (
            TrainingConfig { lambda, loss_scale: 1.0, model: ModelSpec::Mlp(mlp.clone()) },
            mlp,
        )
    }

    #[test]
    fn param_count() {
        assert_eq!(MlpLayout::new(5, &[8, 8]).param_count(), 48 + 72 + 9);
        assert_eq!(MlpLayout::new(2, &[]).param_count(), 3);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let u = fixture();
        let ids: Vec<usize> = u.record_ids().collect();
        let (cfg, mlp) = config(0.0);
        let layout = MlpLayout::new(2, &mlp.hidden);
        let init = ModelParams::new(
            ModelKind::Mlp { hidden: mlp.hidden.clone() },
            2,
            initial_theta(&layout, seed::derive(11, &[0])),
        )
        .unwrap();
        let trained = train_mlp(&u, &ids, &cfg, &mlp, 11).unwrap();
        let before = fitness(&init, &u, &ids, &cfg).unwrap();
        let after = fitness(&trained, &u, &ids, &cfg).unwrap();
        assert!(after < before, "{after} !< {before}");
        assert_eq!(trained, train_mlp(&u, &ids, &cfg, &mlp, 11).unwrap());
    }

    #[test]
    fn minibatch_training_is_deterministic() {
        let u = fixture();
        let ids: Vec<usize> = u.record_ids().collect();
        let (cfg, mut mlp) = config(1e-3);
        mlp.batch_size = Some(4);
        let a = train_mlp(&u, &ids, &cfg, &mlp, 5).unwrap();
        assert_eq!(a, train_mlp(&u, &ids, &cfg, &mlp, 5).unwrap());
        assert_ne!(a, train_mlp(&u, &ids, &cfg, &mlp, 6).unwrap());
    }

    #[test]
    fn divergence_names_epoch() {
        let u = fixture();
        let ids: Vec<usize> = u.record_ids().collect();
        let (cfg, mut mlp) = config(0.0);
        mlp.step_size = 1e6;
        match train_mlp(&u, &ids, &cfg, &mlp, 1) {
            Err(Error::Divergence { epoch }) => assert!(epoch < mlp.epochs),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        // Oracle: central finite differences of the fitness, step 1e-6.
        let u = fixture();
        let ids: Vec<usize> = u.record_ids().collect();
        let (cfg, mlp) = config(0.01);
        let layout = MlpLayout::new(2, &mlp.hidden);
        for point in 0..10 {
            let theta = initial_theta(&layout, 100 + point);
            let p = ModelParams::new(ModelKind::Mlp { hidden: mlp.hidden.clone() }, 2, theta.clone()).unwrap();
            let g = fitness_gradient(&p, &u, &ids, &cfg).unwrap();
            let h = 1e-6;
            for k in 0..theta.len() {
                let mut plus = p.clone();
                plus.theta[k] += h;
                let mut minus = p.clone();
                minus.theta[k] -= h;
                let fd = (fitness(&plus, &u, &ids, &cfg).unwrap() - fitness(&minus, &u, &ids, &cfg).unwrap())
                    / (2.0 * h);
                let scale = fd.abs().max(g[k].abs()).max(1e-3);
                assert!((fd - g[k]).abs() / scale < 1e-4, "point {point} coord {k}: {fd} vs {}", g[k]);
            }
        }
    }
}
