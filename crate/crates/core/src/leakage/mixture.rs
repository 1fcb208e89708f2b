use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::GaussianFit;
use crate::seed;

/// Monte-Carlo estimate with its standard error, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureMi {
    pub value: f64,
    pub stderr: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Mutual information between a membership bit (`P{member} = alpha_member`)
/// and a parameter vector drawn from `fit1` (member) or `fit0` (non-member):
///
/// `a0 * KL(p0 || m) + a1 * KL(p1 || m)` with `m = a0 p0 + a1 p1`,
/// each KL estimated from `samples` draws of its component.
pub fn mi_mixture_estimate(
    fit0: &GaussianFit,
    fit1: &GaussianFit,
    alpha_member: f64,
    samples: usize,
    seed: u64,
) -> Result<MixtureMi> {
    if !(alpha_member > 0.0 && alpha_member < 1.0) {
        return Err(Error::Range(format!(
            "alpha_member must lie in (0, 1), got {alpha_member}"
        )));
    }
    if samples < 1000 {
        return Err(Error::SampleSize {
            needed: 1000,
            got: samples,
        });
    }
    if fit0.dim() != fit1.dim() {
        return Err(Error::Dimension {
            expected: fit0.dim(),
            found: fit1.dim(),
        });
    }
    let a1 = alpha_member;
    let a0 = 1.0 - a1;
    let (ln_a0, ln_a1) = (a0.ln(), a1.ln());

    let component = |own: &GaussianFit, own_is_member: bool, stream: u64| -> Vec<f64> {
        let mut rng = seed::derived_rng(seed, &[seed::tag::MIXTURE, stream]);
        (0..samples)
            .map(|_| {
                let x = own.sample(&mut rng);
                let l0 = fit0.log_density(&x);
                let l1 = fit1.log_density(&x);
                let mix = log_add_exp(ln_a0 + l0, ln_a1 + l1);
                if own_is_member {
                    l1 - mix
                } else {
                    l0 - mix
                }
            })
            .collect()
    };
    let terms0 = component(fit0, false, 0);
    let terms1 = component(fit1, true, 1);
    let m0 = crate::stats::mean(&terms0);
    let m1 = crate::stats::mean(&terms1);
    let value = a0 * m0 + a1 * m1;
    let var0 = crate::stats::sample_variance(&terms0) / samples as f64;
    let var1 = crate::stats::sample_variance(&terms1) / samples as f64;
    let stderr = (a0 * a0 * var0 + a1 * a1 * var1).sqrt();
    if !value.is_finite() || !stderr.is_finite() {
        return Err(Error::Numeric("mixture information estimate is not finite".into()));
    }
    Ok(MixtureMi { value, stderr })
}
