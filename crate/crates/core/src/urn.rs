//! Model parameters, the one-step transition law, and the exact
//! dynamic-programming law of `M_n` used as the ground-truth oracle.

use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};

/// Initial composition and colour-switch probabilities of an RPW urn.
///
/// `u` white and `v` black balls to start; a drawn white ball spawns a black
/// one with probability `p_w`, a drawn black ball spawns a white one with
/// probability `p_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnParams {
    u: u64,
    v: u64,
    p_w: f64,
    p_b: f64,
}

impl UrnParams {
    pub fn new(u: u64, v: u64, p_w: f64, p_b: f64) -> Result<Self> {
        if u == 0 && v == 0 {
            return Err(Error::InvalidParams(
                "urn must start with at least one ball (u + v >= 1)".into(),
            ));
        }
        for (name, p) in [("p_w", p_w), ("p_b", p_b)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {p} is not in (0, 1)"
                )));
            }
        }
        Ok(Self { u, v, p_w, p_b })
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn v(&self) -> u64 {
        self.v
    }

    pub fn p_w(&self) -> f64 {
        self.p_w
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    /// `1 - p_w - p_b`, the reinforcement strength.
    pub fn lambda(&self) -> f64 {
        1.0 - self.p_w - self.p_b
    }

    pub fn p_min(&self) -> f64 {
        self.p_w.min(self.p_b)
    }

    pub fn p_max(&self) -> f64 {
        self.p_w.max(self.p_b)
    }

    /// Relabels white as black and vice versa.
    pub fn swapped(&self) -> Self {
        Self {
            u: self.v,
            v: self.u,
            p_w: self.p_b,
            p_b: self.p_w,
        }
    }

    /// Same switch probabilities, different starting composition.
    pub fn with_composition(&self, u: u64, v: u64) -> Result<Self> {
        Self::new(u, v, self.p_w, self.p_b)
    }
}

/// Probability that step `i + 1` adds a white ball given `m` whites were
/// added in the first `i` steps.
pub fn white_add_prob(params: &UrnParams, i: u64, m: u64) -> Result<f64> {
    if m > i {
        return Err(Error::Contract(format!(
            "white count m = {m} exceeds step index i = {i}"
        )));
    }
    Ok(white_add_prob_unchecked(params, i, m))
}

#[inline]
pub(crate) fn white_add_prob_unchecked(params: &UrnParams, i: u64, m: u64) -> f64 {
    let total = (params.u + params.v + i) as f64;
    let whites = (params.u + m) as f64;
    let blacks = (params.v + i - m) as f64;
    let p = (1.0 - params.p_w) * whites / total + params.p_b * blacks / total;
    p.clamp(0.0, 1.0)
}

pub const DEFAULT_DP_CAP: u64 = 5000;

/// Forward DP over `(step, whites added)`; cost is quadratic in `n`.
#[derive(Debug, Clone, Copy)]
pub struct DpOracle {
    pub max_steps: u64,
}

impl Default for DpOracle {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_DP_CAP,
        }
    }
}

impl DpOracle {
    pub fn pmf(&self, params: &UrnParams, n: u64) -> Result<DiscreteDist> {
        if n > self.max_steps {
            return Err(Error::Resource {
                what: "exact DP horizon",
                requested: n as u128,
                limit: self.max_steps as u128,
            });
        }
        let mut row = vec![0.0f64; n as usize + 1];
        row[0] = 1.0;
        for i in 0..n {
            // walk downward so row[m] is still the step-i value when read
            for m in (0..=i).rev() {
                let mass = row[m as usize];
                if mass == 0.0 {
                    continue;
                }
                let p = white_add_prob_unchecked(params, i, m);
                row[m as usize + 1] += mass * p;
                row[m as usize] = mass * (1.0 - p);
            }
        }
        DiscreteDist::new(0, row)
    }
}

/// Exact law of `M_n` with the default horizon cap.
pub fn exact_pmf_dp(params: &UrnParams, n: u64) -> Result<DiscreteDist> {
    DpOracle::default().pmf(params, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::moments_of;
    use crate::numeric::ln_choose;

    fn p(u: u64, v: u64, pw: f64, pb: f64) -> UrnParams {
        UrnParams::new(u, v, pw, pb).unwrap()
    }

    #[test]
    fn rejects_empty_urn_and_bad_probabilities() {
        assert!(UrnParams::new(0, 0, 0.1, 0.1).is_err());
        assert!(UrnParams::new(1, 0, 0.0, 0.1).is_err());
        assert!(UrnParams::new(1, 0, 0.1, 1.0).is_err());
        assert!(UrnParams::new(1, 0, f64::NAN, 0.5).is_err());
        assert!(UrnParams::new(0, 1, 0.1, 0.1).is_ok());
    }

    #[test]
    fn white_add_prob_examples() {
        assert_eq!(white_add_prob(&p(1, 1, 0.5, 0.5), 0, 0).unwrap(), 0.5);
        let got = white_add_prob(&p(1, 1, 0.1, 0.3), 1, 1).unwrap();
        assert!((got - 0.7).abs() < 1e-15);
        let got = white_add_prob(&p(0, 1, 1e-6 / 3.0, 1e-6), 0, 0).unwrap();
        assert!((got - 1e-6).abs() < 1e-21);
    }

    #[test]
    fn white_add_prob_rejects_m_above_i() {
        assert!(matches!(
            white_add_prob(&p(1, 1, 0.1, 0.3), 2, 3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn white_add_prob_monotone_when_reinforcing() {
        let params = p(2, 3, 0.2, 0.3);
        for i in 0..40 {
            let probs: Vec<f64> = (0..=i)
                .map(|m| white_add_prob(&params, i, m).unwrap())
                .collect();
            assert!(probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
            assert!(probs.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn dp_point_mass_at_zero_steps() {
        let d = exact_pmf_dp(&p(3, 2, 0.2, 0.1), 0).unwrap();
        assert_eq!(d.masses(), &[1.0]);
    }

    #[test]
    fn dp_two_step_enumeration() {
        let d = exact_pmf_dp(&p(1, 1, 0.1, 0.3), 2).unwrap();
        let want = [0.20, 0.38, 0.42];
        for (got, want) in d.masses().iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        let (mean, var) = moments_of(&d);
        assert!((mean - 1.22).abs() < 1e-14);
        assert!((var - 0.5716).abs() < 1e-14);
    }

    #[test]
    fn dp_symmetric_case_is_binomial() {
        let d = exact_pmf_dp(&p(1, 1, 0.5, 0.5), 25).unwrap();
        let max_dev = d
            .masses()
            .iter()
            .enumerate()
            .map(|(x, m)| (m - (ln_choose(25, x as u64) - 25.0 * 2f64.ln()).exp()).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-14, "max deviation {max_dev}");
        let (mean, var) = moments_of(&d);
        assert!((mean - 12.5).abs() < 1e-12);
        assert!((var - 6.25).abs() < 1e-12);
    }

    #[test]
    fn dp_cap_is_enforced() {
        let oracle = DpOracle { max_steps: 10 };
        assert!(matches!(
            oracle.pmf(&p(1, 1, 0.1, 0.1), 11),
            Err(Error::Resource { .. })
        ));
        assert!(oracle.pmf(&p(1, 1, 0.1, 0.1), 10).is_ok());
    }

    #[test]
    fn dp_masses_normalized() {
        for (u, v, pw, pb, n) in [
            (0, 1, 0.01, 0.03, 500),
            (4, 1, 0.3, 0.6, 300),
            (1, 7, 0.9, 0.8, 200),
        ] {
            let d = exact_pmf_dp(&p(u, v, pw, pb), n).unwrap();
            let s: f64 = d.masses().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
