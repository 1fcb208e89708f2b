use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Finite parameter grid: multiples of `step` inside the box `[box_lo, box_hi]`.
///
/// Box vectors of length one apply to every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationGrid {
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    step: f64,
}

impl QuantizationGrid {
    pub fn new(box_lo: Vec<f64>, box_hi: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!("grid step must be positive, got {step}")));
        }
        if box_lo.is_empty() || box_lo.len() != box_hi.len() {
            return Err(Error::Dimension {
                expected: box_lo.len().max(1),
                found: box_hi.len(),
            });
        }
        for (lo, hi) in box_lo.iter().zip(&box_hi) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("grid box needs lo < hi, got [{lo}, {hi}]")));
            }
            if (lo / step).ceil() > (hi / step).floor() {
                return Err(Error::Config(format!(
                    "box [{lo}, {hi}] contains no multiple of step {step}"
                )));
            }
        }
        Ok(Self { box_lo, box_hi, step })
    }

    /// Same box on every coordinate.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi], step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn bounds(&self, i: usize, dim: usize) -> Result<(f64, f64)> {
        match self.box_lo.len() {
            1 => Ok((self.box_lo[0], self.box_hi[0])),
            n if n == dim => Ok((self.box_lo[i], self.box_hi[i])),
            n => Err(Error::Dimension { expected: n, found: dim }),
        }
    }

    /// Projects one coordinate: clip into the box, then round to the nearest
    /// grid point (ties to the even multiple of `step`).
    pub fn project(&self, value: f64, lo: f64, hi: f64) -> f64 {
        let k_lo = (lo / self.step).ceil();
        let k_hi = (hi / self.step).floor();
        let k = (value.clamp(lo, hi) / self.step).round_ties_even();
        k.clamp(k_lo, k_hi) * self.step
    }
}

impl Default for QuantizationGrid {
    /// Step `2^-16` on the box `[-64, 64]`.
    fn default() -> Self {
        Self {
            box_lo: vec![-64.0],
            box_hi: vec![64.0],
            step: 2f64.powi(-16),
        }
    }
}

/// Projects every coordinate of `params` onto the grid.
pub fn quantize(params: &ModelParams, grid: &QuantizationGrid) -> Result<ModelParams> {
    let dim = params.dim();
    let mut out = params.clone();
    for (i, t) in out.theta.iter_mut().enumerate() {
        let (lo, hi) = grid.bounds(i, dim)?;
        *t = grid.project(*t, lo, hi);
    }
    Ok(out)
}
