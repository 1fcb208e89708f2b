use crate::error::{Error, Result};

/// A scalar normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal1d {
    pub mean: f64,
    pub std: f64,
}

impl Normal1d {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::Range(format!("need finite mean and std > 0, got ({mean}, {std})")));
        }
        Ok(Self { mean, std })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        0.5 * libm::erfc(-(x - self.mean) / (self.std * std::f64::consts::SQRT_2))
    }

    #[cfg(test)]
    fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - self.std.ln()
    }
}

/// Points where the two log densities are equal, in increasing order.
fn crossings(p: &Normal1d, q: &Normal1d) -> Vec<f64> {
    // log p - log q = a x^2 + b x + c
    let (vp, vq) = (p.std * p.std, q.std * q.std);
    let a = 0.5 / vq - 0.5 / vp;
    let b = p.mean / vp - q.mean / vq;
    let c = 0.5 * q.mean * q.mean / vq - 0.5 * p.mean * p.mean / vp + (q.std / p.std).ln();
    if a.abs() <= 1e-14 * (0.5 / vp).max(0.5 / vq) {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let t = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if t == 0.0 {
        let r = (-c / a).sqrt();
        (-r, r)
    } else {
        (t / a, c / t)
    };
    let mut roots = vec![r1.min(r2), r1.max(r2)];
    roots.dedup();
    roots
}

/// Total variation distance between two scalar normals.
///
/// The real line is split at the density crossings; on each piece one
/// density dominates, so the distance is half the sum of `|P(piece) - Q(piece)|`.
pub fn tv_gaussian_1d(p: &Normal1d, q: &Normal1d) -> f64 {
    if p == q {
        return 0.0;
    }
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(crossings(p, q));
    edges.push(f64::INFINITY);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let dp = p.cdf(w[1]) - p.cdf(w[0]);
        let dq = q.cdf(w[1]) - q.cdf(w[0]);
        total += (dp - dq).abs();
    }
    (0.5 * total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dominance(p: &Normal1d, q: &Normal1d, x: f64) -> f64 {
        (p.log_density(x) - q.log_density(x)).signum()
    }

    #[test]
    fn equal_distributions() {
        let p = Normal1d::new(0.3, 1.7).unwrap();
        assert_eq!(tv_gaussian_1d(&p, &p), 0.0);
    }

    #[test]
    fn equal_variance_closed_form() {
        let p = Normal1d::new(0.0, 1.0).unwrap();
        let q = Normal1d::new(1.0, 1.0).unwrap();
        // Phi(0.5) - Phi(-0.5)
        assert!((tv_gaussian_1d(&p, &q) - 0.382_924_922_548_026_2).abs() < 1e-12);
    }

    #[test]
    fn same_mean_different_scale() {
        // Crossings at +-x0 where x0^2 = 2 ln(s) s^2 / (s^2 - 1); TV = 2 (Phi(x0) - Phi(x0 / s)).
        let s: f64 = 2.0;
        let x0 = (2.0 * s.ln() * s * s / (s * s - 1.0)).sqrt();
        let p = Normal1d::new(0.0, 1.0).unwrap();
        let q = Normal1d::new(0.0, s).unwrap();
        let expect = 2.0 * (p.cdf(x0) - p.cdf(x0 / s));
        assert!((tv_gaussian_1d(&p, &q) - expect).abs() < 1e-12);
        assert!((tv_gaussian_1d(&q, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn crossings_are_crossings() {
        let p = Normal1d::new(-0.4, 0.6).unwrap();
        let q = Normal1d::new(1.2, 1.9).unwrap();
        for r in crossings(&p, &q) {
            assert!((p.log_density(r) - q.log_density(r)).abs() < 1e-10);
            assert_ne!(dominance(&p, &q, r - 1e-3), dominance(&p, &q, r + 1e-3));
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(Normal1d::new(0.0, 0.0).is_err());
        assert!(Normal1d::new(f64::NAN, 1.0).is_err());
    }
}
