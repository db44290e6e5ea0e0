use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, KahanSum};

pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability mass function on the integers `offset, offset + 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    offset: i64,
    masses: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(offset: i64, masses: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(offset, masses, NORMALIZATION_TOL)
    }

    /// Like [`DiscreteDist::new`] with a caller-chosen normalization tolerance.
    pub fn with_tolerance(offset: i64, masses: Vec<f64>, tol: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Contract("distribution has empty support".into()));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(Error::Contract(format!("mass at index {i} is {m}")));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > tol {
            return Err(Error::Contract(format!(
                "masses sum to {total}, not 1 (tol {tol:e})"
            )));
        }
        Ok(Self { offset, masses })
    }

    pub fn point_mass(at: i64) -> Self {
        Self {
            offset: at,
            masses: vec![1.0],
        }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn prob(&self, x: i64) -> f64 {
        usize::try_from(x - self.offset)
            .ok()
            .and_then(|i| self.masses.get(i).copied())
            .unwrap_or(0.0)
    }

    /// `(value, mass)` pairs over the support.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.masses
            .iter()
            .enumerate()
            .map(move |(i, &m)| (self.offset + i as i64, m))
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }
}

/// Mean and variance, two-pass with compensated sums.
pub fn moments_of(dist: &DiscreteDist) -> (f64, f64) {
    let mean = dist
        .iter()
        .map(|(x, m)| x as f64 * m)
        .collect::<KahanSum>()
        .value();
    let var = dist
        .iter()
        .map(|(x, m)| {
            let d = x as f64 - mean;
            d * d * m
        })
        .collect::<KahanSum>()
        .value();
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_moments() {
        assert_eq!(moments_of(&DiscreteDist::point_mass(0)), (0.0, 0.0));
        assert_eq!(moments_of(&DiscreteDist::point_mass(7)), (7.0, 0.0));
    }

    #[test]
    fn rejects_bad_masses() {
        assert!(DiscreteDist::new(0, vec![]).is_err());
        assert!(DiscreteDist::new(0, vec![0.5, 0.6]).is_err());
        assert!(DiscreteDist::new(0, vec![1.5, -0.5]).is_err());
        assert!(DiscreteDist::new(0, vec![f64::NAN, 1.0]).is_err());
        assert!(DiscreteDist::with_tolerance(0, vec![0.5, 0.5 + 1e-11], 1e-10).is_ok());
    }

    #[test]
    fn offset_support_lookup() {
        let d = DiscreteDist::new(-1, vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.prob(-1), 0.25);
        assert_eq!(d.prob(0), 0.5);
        assert_eq!(d.prob(2), 0.0);
        assert_eq!(d.prob(-5), 0.0);
        let (mean, var) = moments_of(&d);
        assert!(mean.abs() < 1e-15);
        assert!((var - 0.5).abs() < 1e-15);
    }
}
