use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataUniverse;
use crate::error::{Error, Result};

/// Standardize-then-project transform onto the top principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub means: Vec<f64>,
    /// Per-column divisors; 1 for zero-variance columns and when
    /// standardization is off.
    pub scales: Vec<f64>,
    /// `p_raw x p_x`, orthonormal columns ordered by explained variance.
    pub components: DMatrix<f64>,
    /// Sample variance (n-1 denominator) along each component, nonincreasing.
    pub explained_variance: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct PcaOptions {
    /// Scale each column to unit variance before the eigendecomposition.
    pub standardize: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

/// Fits a PCA transform keeping the top `p_x` components.
///
/// Eigenvector signs are fixed so that each component's largest-magnitude
/// entry is positive.
pub fn fit_pca(universe: &DataUniverse, p_x: usize, options: PcaOptions) -> Result<PcaTransform> {
    let p_raw = universe.n_features();
    if p_x == 0 || p_x > p_raw {
        return Err(Error::Dimension {
            expected: p_raw,
            found: p_x,
        });
    }
    let n = universe.len();
    let mut means = vec![0.0; p_raw];
    for id in universe.record_ids() {
        for (m, v) in means.iter_mut().zip(universe.features(id)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(p_raw, p_raw);
    let mut centered = vec![0.0; p_raw];
    for id in universe.record_ids() {
        for ((c, v), m) in centered.iter_mut().zip(universe.features(id)).zip(&means) {
            *c = v - m;
        }
        for a in 0..p_raw {
            for b in a..p_raw {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..p_raw {
        for b in a..p_raw {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let scales: Vec<f64> = (0..p_raw)
        .map(|j| {
            let sd = cov[(j, j)].sqrt();
            if options.standardize && sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    for a in 0..p_raw {
        for b in 0..p_raw {
            cov[(a, b)] /= scales[a] * scales[b];
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p_raw).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut components = DMatrix::<f64>::zeros(p_raw, p_x);
    let mut explained_variance = Vec::with_capacity(p_x);
    for (k, &idx) in order.iter().take(p_x).enumerate() {
        let mut col = eigen.eigenvectors.column(idx).into_owned();
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
        components.set_column(k, &col);
        explained_variance.push(eigen.eigenvalues[idx].max(0.0));
    }

    Ok(PcaTransform {
        means,
        scales,
        components,
        explained_variance,
    })
}

/// Projects raw features: `((raw - means) / scales) * components`.
pub fn apply_pca(transform: &PcaTransform, universe: &DataUniverse) -> Result<DataUniverse> {
    let p_raw = transform.means.len();
    if universe.n_features() != p_raw {
        return Err(Error::Dimension {
            expected: p_raw,
            found: universe.n_features(),
        });
    }
    let p_x = transform.components.ncols();
    let mut out = Vec::with_capacity(universe.len() * p_x);
    let mut z = vec![0.0; p_raw];
    for id in universe.record_ids() {
        for (j, v) in universe.features(id).iter().enumerate() {
            z[j] = (v - transform.means[j]) / transform.scales[j];
        }
        for k in 0..p_x {
            out.push(
                (0..p_raw)
                    .map(|j| z[j] * transform.components[(j, k)])
                    .sum(),
            );
        }
    }
    DataUniverse::new(out, universe.labels().to_vec(), p_x)
}
