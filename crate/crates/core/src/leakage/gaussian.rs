use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ModelParams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian approximation `N(mean, cov)` of a parameter distribution.
#[derive(Debug, Clone)]
pub struct GaussianFit {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
    /// Number of samples the fit was estimated from (0 when built directly).
    pub trials: usize,
}

impl PartialEq for GaussianFit {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov && self.trials == other.trials
    }
}

impl GaussianFit {
    /// Builds a fit from an explicit mean and a symmetric positive-definite covariance.
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if cov.nrows() != k || cov.ncols() != k {
            return Err(Error::Dimension {
                expected: k,
                found: cov.nrows(),
            });
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if asym > 1e-12 * cov.abs().max().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov,
            chol,
            log_det,
            trials: 0,
        })
    }

    /// Scalar Gaussian with the given mean and variance.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(self.dim(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&d)
            .expect("cholesky factor has a positive diagonal");
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + z.norm_squared())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = self.chol.l() * z + &self.mean;
        x.iter().copied().collect()
    }
}

/// Shrinkage added to the sample covariance: `max(1e-10, 1e-8 * trace / dim)`.
pub fn covariance_ridge(trace: f64, dim: usize) -> f64 {
    (1e-8 * trace / dim as f64).max(1e-10)
}

/// Sample mean and unbiased covariance plus a small ridge.
///
/// Needs at least `dim + 1` samples.
pub fn fit_gaussian_vectors(samples: &[Vec<f64>]) -> Result<GaussianFit> {
    let dim = samples.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::SampleSize { needed: 2, got: samples.len() });
    }
    if samples.len() < dim + 1 {
        return Err(Error::SampleSize {
            needed: dim + 1,
            got: samples.len(),
        });
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: bad.len(),
        });
    }
    let t = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut c = vec![0.0; dim];
    for s in samples {
        for ((ci, v), m) in c.iter_mut().zip(s).zip(&mean) {
            *ci = v - m;
        }
        for a in 0..dim {
            for b in a..dim {
                cov[(a, b)] += c[a] * c[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / (t - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let gamma = covariance_ridge(cov.trace(), dim);
    for a in 0..dim {
        cov[(a, a)] += gamma;
    }
    let mut fit = GaussianFit::new(mean, cov)?;
    fit.trials = samples.len();
    Ok(fit)
}

/// Gaussian fit of trained parameter vectors.
pub fn fit_gaussian(samples: &[ModelParams]) -> Result<GaussianFit> {
    let vectors: Vec<Vec<f64>> = samples.iter().map(|s| s.theta.clone()).collect();
    fit_gaussian_vectors(&vectors)
}

/// Closed-form `KL(p || q)` in nats.
pub fn kl_gaussian(p: &GaussianFit, q: &GaussianFit) -> Result<f64> {
    let k = p.dim();
    if q.dim() != k {
        return Err(Error::Dimension {
            expected: k,
            found: q.dim(),
        });
    }
    let lq = q.chol.l_dirty();
    // tr(Sq^-1 Sp) = |Lq^-1 Lp|_F^2
    let m = lq
        .solve_lower_triangular(&p.chol.l())
        .ok_or(Error::NotPositiveDefinite)?;
    let trace = m.norm_squared();
    let d = &q.mean - &p.mean;
    let z = lq.solve_lower_triangular(&d).ok_or(Error::NotPositiveDefinite)?;
    let kl = 0.5 * (trace - k as f64 + z.norm_squared() + q.log_det - p.log_det);
    if !kl.is_finite() {
        return Err(Error::Numeric("KL divergence is not finite".into()));
    }
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples_give_ridge_covariance() {
        let pts = vec![vec![1.0, -2.0]; 5];
        let f = fit_gaussian_vectors(&pts).unwrap();
        assert_eq!(f.mean(), &[1.0, -2.0]);
        assert_eq!(*f.cov(), DMatrix::identity(2, 2) * 1e-10);
        assert_eq!(f.trials, 5);
    }

    #[test]
    fn sample_size_threshold() {
        assert!(fit_gaussian_vectors(&[vec![0.0], vec![1.0]]).is_ok());
        let r = fit_gaussian_vectors(&[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]);
        assert!(matches!(r, Err(Error::SampleSize { needed: 4, got: 2 })));
    }

    #[test]
    fn recovers_known_scalar_gaussian() {
        let (mu, sd, t) = (1.5, 2.0, 10_000);
        let mut rng = seed::rng(12);
        let dist = Normal::new(mu, sd).unwrap();
        let pts: Vec<Vec<f64>> = (0..t).map(|_| vec![dist.sample(&mut rng)]).collect();
        let f = fit_gaussian_vectors(&pts).unwrap();
        let se_mean = sd / (t as f64).sqrt();
        let se_var = sd * sd * (2.0 / (t as f64 - 1.0)).sqrt();
        assert!((f.mean()[0] - mu).abs() < 4.0 * se_mean);
        assert!((f.cov()[(0, 0)] - sd * sd).abs() < 4.0 * se_var);
    }

    #[test]
    fn kl_scalar_closed_forms() {
        let n01 = GaussianFit::scalar(0.0, 1.0).unwrap();
        assert_eq!(kl_gaussian(&n01, &n01).unwrap(), 0.0);
        let n11 = GaussianFit::scalar(1.0, 1.0).unwrap();
        assert!((kl_gaussian(&n01, &n11).unwrap() - 0.5).abs() < 1e-15);
        let n04 = GaussianFit::scalar(0.0, 4.0).unwrap();
        // quadrature of p ln(p/q) gives 0.318147180559945
        assert!((kl_gaussian(&n01, &n04).unwrap() - 0.318_147_180_559_945_3).abs() < 1e-12);
    }

    #[test]
    fn kl_errors() {
        let a = GaussianFit::scalar(0.0, 1.0).unwrap();
        let b = GaussianFit::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(kl_gaussian(&a, &b), Err(Error::Dimension { .. })));
        assert!(matches!(GaussianFit::scalar(0.0, 0.0), Err(Error::NotPositiveDefinite)));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianFit::new(vec![0.0, 0.0], asym).is_err());
    }

    #[test]
    fn log_density_matches_scalar_formula() {
        let f = GaussianFit::scalar(1.0, 4.0).unwrap();
        let x: f64 = 2.5;
        let expect = -0.5 * ((2.0 * std::f64::consts::PI * 4.0).ln() + (x - 1.0).powi(2) / 4.0);
        assert!((f.log_density(&[x]) - expect).abs() < 1e-14);
    }

    #[test]
    fn sampling_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let f = GaussianFit::new(vec![0.5, -1.0], cov.clone()).unwrap();
        let mut rng = seed::rng(3);
        let pts: Vec<Vec<f64>> = (0..20_000).map(|_| f.sample(&mut rng)).collect();
        let g = fit_gaussian_vectors(&pts).unwrap();
        assert!((g.cov() - cov).abs().max() < 0.06);
        assert!(kl_gaussian(&f, &g).unwrap() < 1e-3);
    }
}
