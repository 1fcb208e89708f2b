use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// The full record set from which training datasets and probe records are drawn.
///
/// Features are stored row-major; `record_ids` are `0..N` and index-aligned with rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataUniverse {
    features: Vec<f64>,
    labels: Vec<f64>,
    n_features: usize,
}

impl DataUniverse {
    /// Builds a universe from row-major features. Requires at least two
    /// records and finite entries everywhere.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, n_features: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        if labels.len() < 2 {
            return Err(Error::Range(format!(
                "universe needs at least 2 records, got {}",
                labels.len()
            )));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Dimension {
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite feature in record {}",
                pos / n_features.max(1)
            )));
        }
        if let Some(pos) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite label in record {pos}")));
        }
        Ok(Self {
            features,
            labels,
            n_features,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::Dimension {
                expected: n_features,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), labels, n_features)
    }

    /// Number of records `N`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self, id: usize) -> &[f64] {
        &self.features[id * self.n_features..(id + 1) * self.n_features]
    }

    pub fn label(&self, id: usize) -> f64 {
        self.labels[id]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_matrix(&self) -> &[f64] {
        &self.features
    }

    pub fn record_ids(&self) -> std::ops::Range<usize> {
        0..self.len()
    }

    /// Keeps only the first `p` feature columns.
    pub fn leading_features(&self, p: usize) -> Result<Self> {
        if p == 0 || p > self.n_features {
            return Err(Error::Range(format!(
                "cannot keep {p} of {} features",
                self.n_features
            )));
        }
        let features = self
            .features
            .chunks(self.n_features)
            .flat_map(|row| row[..p].iter().copied())
            .collect();
        Self::new(features, self.labels.clone(), p)
    }

    /// Serializes as CSV with header `id,f1..fp,label`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for j in 1..=self.n_features {
            let _ = write!(out, ",f{j}");
        }
        out.push_str(",label\n");
        for id in self.record_ids() {
            let _ = write!(out, "{id}");
            for v in self.features(id) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.label(id));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::EmptyUniverse)?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[0] != "id" || cols[cols.len() - 1] != "label" {
            return Err(Error::Parse {
                line: 1,
                message: "expected header id,f1..fp,label".into(),
            });
        }
        let p = cols.len() - 2;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != p + 2 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", p + 2, fields.len()),
                });
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("{s:?}: {e}"),
                })
            };
            let id: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad record id {:?}", fields[0]),
            })?;
            if id != labels.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("record ids must be 0..N in order, found {id}"),
                });
            }
            for f in &fields[1..=p] {
                features.push(parse(f)?);
            }
            labels.push(parse(fields[p + 1])?);
        }
        Self::new(features, labels, p)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}

/// Membership indicator over the universe: exactly `n` of `N` bits set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipMask {
    bits: Vec<bool>,
    members: Vec<usize>,
}

impl MembershipMask {
    /// Builds a mask from sorted or unsorted member ids.
    pub fn from_members(universe_size: usize, members: &[usize]) -> Result<Self> {
        let mut bits = vec![false; universe_size];
        for &m in members {
            if m >= universe_size {
                return Err(Error::Range(format!(
                    "member {m} outside universe of {universe_size}"
                )));
            }
            if bits[m] {
                return Err(Error::Range(format!("member {m} listed twice")));
            }
            bits[m] = true;
        }
        let n = members.len();
        if n == 0 || n >= universe_size {
            return Err(Error::Range(format!(
                "mask needs 0 < n < N, got n={n}, N={universe_size}"
            )));
        }
        let members = (0..universe_size).filter(|&i| bits[i]).collect();
        Ok(Self { bits, members })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Member record ids in increasing order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn non_members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| i)
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn universe_size(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.bits[id]
    }
}

pub(crate) fn check_subset_size(universe_size: usize, n: usize) -> Result<()> {
    if n == 0 || n >= universe_size {
        return Err(Error::Range(format!(
            "training size must satisfy 0 < n < N, got n={n}, N={universe_size}"
        )));
    }
    Ok(())
}

/// Draws a mask uniformly over all `n`-of-`N` subsets.
pub fn sample_mask(universe_size: usize, n: usize, rng_seed: u64) -> Result<MembershipMask> {
    check_subset_size(universe_size, n)?;
    let mut rng = seed::rng(rng_seed);
    let members = index::sample(&mut rng, universe_size, n).into_vec();
    MembershipMask::from_members(universe_size, &members)
}

/// Draws `count` distinct ids uniformly from `0..universe_size` excluding `skip`.
pub(crate) fn sample_excluding<R: rand::Rng + ?Sized>(
    rng: &mut R,
    universe_size: usize,
    skip: usize,
    count: usize,
) -> Vec<usize> {
    index::sample(rng, universe_size - 1, count)
        .into_iter()
        .map(|i| if i >= skip { i + 1 } else { i })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn tiny() -> DataUniverse {
        DataUniverse::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec![0.0, 1.0, 0.0])
            .unwrap()
    }

    #[test]
    fn rejects_degenerate_universes() {
        assert!(matches!(
            DataUniverse::new(vec![], vec![], 2),
            Err(Error::EmptyUniverse)
        ));
        assert!(DataUniverse::new(vec![1.0], vec![1.0], 1).is_err());
        assert!(DataUniverse::new(vec![1.0, f64::NAN], vec![1.0, 2.0], 1).is_err());
        assert!(DataUniverse::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0], 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let u = tiny();
        let text = u.to_csv();
        assert!(text.starts_with("id,f1,f2,label\n"));
        assert_eq!(DataUniverse::parse_csv(&text).unwrap(), u);
    }

    #[test]
    fn leading_features_truncates_columns() {
        let u = tiny().leading_features(1).unwrap();
        assert_eq!(u.n_features(), 1);
        assert_eq!(u.features(2), &[5.0]);
        assert!(tiny().leading_features(3).is_err());
    }

    #[test]
    fn mask_rejects_full_and_empty() {
        assert!(matches!(sample_mask(5, 5, 1), Err(Error::Range(_))));
        assert!(matches!(sample_mask(5, 0, 1), Err(Error::Range(_))));
        assert!(matches!(sample_mask(5, 6, 1), Err(Error::Range(_))));
    }

    #[test]
    fn mask_is_deterministic_and_sized() {
        let a = sample_mask(50, 7, 42).unwrap();
        assert_eq!(a, sample_mask(50, 7, 42).unwrap());
        assert_eq!(a.n(), 7);
        assert_eq!(a.bits().iter().filter(|&&b| b).count(), 7);
        assert_eq!(a.non_members().count(), 43);
    }

    #[test]
    fn two_of_four_subsets_are_uniform() {
        // Exact enumeration: C(4,2) = 6 subsets, each with probability 1/6.
        let draws = 40_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for s in 0..draws {
            let m = sample_mask(4, 2, seed::derive(99, &[s])).unwrap();
            *counts.entry(m.members().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for (subset, c) in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() <= 3.0 * se, "{subset:?}: {freq}");
        }
    }

    #[test]
    fn marginal_inclusion_is_n_over_n() {
        let (big_n, n, draws) = (10, 3, 10_000u64);
        let mut hits = vec![0usize; big_n];
        for s in 0..draws {
            for &m in sample_mask(big_n, n, seed::derive(5, &[s])).unwrap().members() {
                hits[m] += 1;
            }
        }
        let p = n as f64 / big_n as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for h in hits {
            assert!((h as f64 / draws as f64 - p).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn sample_excluding_never_returns_skip() {
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let ids = sample_excluding(&mut rng, 6, 2, 5);
            assert_eq!(ids.len(), 5);
            assert!(!ids.contains(&2));
        }
    }
}
