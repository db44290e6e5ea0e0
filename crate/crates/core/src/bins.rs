use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[lo, hi]`. Bins are half-open `[a, b)` except the
/// last, which is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    lo: f64,
    hi: f64,
    count: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParams(format!(
                "bin range [{lo}, {hi}] is empty or not finite"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidParams("bin count must be at least 1".into()));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        let lo = self.lo + i as f64 * w;
        let hi = if i + 1 == self.count {
            self.hi
        } else {
            self.lo + (i + 1) as f64 * w
        };
        (lo, hi)
    }

    pub fn center(&self, i: usize) -> f64 {
        let (a, b) = self.edges(i);
        0.5 * (a + b)
    }

    /// Bin holding `x`, or `None` outside `[lo, hi]`.
    pub fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let i = ((x - self.lo) / self.width()).floor() as usize;
        Some(i.min(self.count - 1))
    }
}

/// Integer histogram over a [`BinSpec`] with out-of-range tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn empty(bins: &BinSpec) -> Self {
        Self {
            counts: vec![0; bins.count()],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn record(&mut self, bins: &BinSpec, x: f64) {
        match bins.index(x) {
            Some(i) => self.counts[i] += 1,
            None if x < bins.lo() => self.underflow += 1,
            None => self.overflow += 1,
        }
    }

    pub fn merge(mut self, other: Histogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }
}
