use nalgebra::{DMatrix, DVector};

use crate::data::DataUniverse;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, TrainingConfig};

/// Closed-form minimizer of `lambda * |theta|^2 + loss_scale * mean squared error`.
///
/// Solves `(X'X + (n * lambda / loss_scale) I) theta = X'y`. With
/// `loss_scale == 0` the data term vanishes and the minimizer is `theta = 0`.
pub fn train_ridge(
    universe: &DataUniverse,
    members: &[usize],
    config: &TrainingConfig,
    intercept: bool,
) -> Result<ModelParams> {
    if members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let kind = ModelKind::Linear { intercept };
    let inputs = universe.n_features();
    let p = kind.param_count(inputs);

    if config.loss_scale == 0.0 {
        if config.lambda > 0.0 {
            return ModelParams::new(kind, inputs, vec![0.0; p]);
        }
        return Err(Error::Singular);
    }
    if config.lambda == 0.0 && members.len() < p {
        return Err(Error::Singular);
    }

    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![1.0; p];
    for &id in members {
        row[..inputs].copy_from_slice(universe.features(id));
        let y = universe.label(id);
        for a in 0..p {
            rhs[a] += row[a] * y;
            for b in a..p {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let ridge = members.len() as f64 * config.lambda / config.loss_scale;
    for a in 0..p {
        gram[(a, a)] += ridge;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let chol = gram.cholesky().ok_or(Error::Singular)?;
    let theta = chol.solve(&rhs);
    ModelParams::new(kind, inputs, theta.iter().copied().collect()).map_err(|e| match e {
        Error::Numeric(_) => Error::Singular,
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fitness, fitness_gradient, ModelSpec};
    use crate::seed;
    use rand::Rng;

    fn cfg(lambda: f64) -> TrainingConfig {
        TrainingConfig { lambda, loss_scale: 1.0, model: ModelSpec::Linear { intercept: false } }
    }

    /// Plain Gaussian elimination with partial pivoting; independent of nalgebra.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn noiseless_interpolation() {
        let rows: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64]).collect();
        let u = DataUniverse::from_rows(&rows, (1..=5).map(|i| 2.0 * i as f64).collect()).unwrap();
        let t = train_ridge(&u, &[0, 1, 2, 3], &cfg(0.0), false).unwrap();
        assert!((t.theta[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn heavy_regularization_shrinks() {
        let rows: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64, (i * i) as f64 / 5.0]).collect();
        let u = DataUniverse::from_rows(&rows, vec![1.0, -2.0, 0.5, 3.0, 1.0]).unwrap();
        let ids = [0, 1, 2, 3, 4];
        let free = train_ridge(&u, &ids, &cfg(0.0), false).unwrap();
        let tight = train_ridge(&u, &ids, &cfg(1e6), false).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&tight.theta) <= 1e-3 * norm(&free.theta));
    }

    #[test]
    fn three_points_match_independent_solver() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, -1.0]];
        let ys = vec![1.0, 0.0, 2.0];
        let u = DataUniverse::from_rows(&rows, ys.clone()).unwrap();
        let t = train_ridge(&u, &[0, 1, 2], &cfg(1.0), false).unwrap();
        // (X'X + 3 * 1 * I) theta = X'y
        let mut a = vec![vec![0.0; 2]; 2];
        let mut b = vec![0.0; 2];
        for (r, y) in rows.iter().zip(&ys) {
            for i in 0..2 {
                b[i] += r[i] * y;
                for j in 0..2 {
                    a[i][j] += r[i] * r[j];
                }
            }
        }
        a[0][0] += 3.0;
        a[1][1] += 3.0;
        let expect = dense_solve(a, b);
        for (x, e) in t.theta.iter().zip(expect) {
            assert!((x - e).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_without_regularization() {
        let u = DataUniverse::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 1.0]], vec![1.0, 2.0, 3.0])
            .unwrap();
        assert!(matches!(train_ridge(&u, &[0, 1], &cfg(0.0), false), Err(Error::Singular)));
        assert!(matches!(train_ridge(&u, &[0], &cfg(0.0), false), Err(Error::Singular)));
        assert!(train_ridge(&u, &[0, 1], &cfg(0.1), false).is_ok());
        let zero_scale = TrainingConfig { loss_scale: 0.0, ..cfg(0.0) };
        assert!(matches!(train_ridge(&u, &[0, 1], &zero_scale, false), Err(Error::Singular)));
        let data_free = TrainingConfig { loss_scale: 0.0, ..cfg(1.0) };
        assert_eq!(train_ridge(&u, &[0, 1], &data_free, false).unwrap().theta, vec![0.0, 0.0]);
    }

    #[test]
    fn stationarity_and_global_optimality() {
        let mut rng = seed::rng(21);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = DataUniverse::from_rows(&rows, ys).unwrap();
        let ids: Vec<usize> = (0..20).collect();
        for intercept in [false, true] {
            let c = TrainingConfig { lambda: 0.05, loss_scale: 0.7, model: ModelSpec::Linear { intercept } };
            let t = train_ridge(&u, &ids, &c, intercept).unwrap();
            let g = fitness_gradient(&t, &u, &ids, &c).unwrap();
            let xty: f64 = {
                let mut v = vec![0.0; 3];
                for &i in &ids {
                    for (k, x) in u.features(i).iter().enumerate() {
                        v[k] += x * u.label(i);
                    }
                }
                v.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(gnorm <= 1e-8 * (1.0 + xty), "{gnorm}");
            let best = fitness(&t, &u, &ids, &c).unwrap();
            for _ in 0..100 {
                let mut q = t.clone();
                q.theta.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
                assert!(best <= fitness(&q, &u, &ids, &c).unwrap());
            }
        }
    }
}
