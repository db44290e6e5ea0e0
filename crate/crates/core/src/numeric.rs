//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `Γ(a) / Γ(b)` through log-gamma differences, sign-aware so that
/// arguments in (-1, 0) are handled.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    let (la, sa) = libm::lgamma_r(a);
    let (lb, sb) = libm::lgamma_r(b);
    f64::from(sa * sb) * (la - lb).exp()
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `(1 - p)^k` without losing digits for tiny `p`.
#[inline]
pub fn pow_one_minus(p: f64, k: f64) -> f64 {
    (k * (-p).ln_1p()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = compensated_sum(v.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn gamma_ratio_integer_args() {
        // Γ(7)/Γ(5) = 6·5
        assert!((gamma_ratio(7.0, 5.0) - 30.0).abs() < 1e-12);
        // Γ(-0.5) = -2√π, Γ(0.5) = √π
        assert!((gamma_ratio(-0.5, 0.5) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn ln_choose_small() {
        assert!((ln_choose(10, 3).exp() - 120.0).abs() < 1e-9);
        assert_eq!(ln_choose(5, 0), 0.0);
    }
}
