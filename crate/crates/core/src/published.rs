//! A published closed-form variance for this urn (one ball
//! added per draw), kept as a forensic reference. At `p_w = p_b = 1/2` the
//! urn reduces to fair coin flips with variance `n / 4`, which this formula
//! does not reproduce.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::gamma_ratio;
use crate::urn::UrnParams;

pub const DEFAULT_PUBLISHED_CAP: u64 = 500;

/// Change of variables used by the published formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedParams {
    pub t_w: f64,
    pub t_b: f64,
    pub c: u64,
    pub lambda: f64,
}

impl PublishedParams {
    pub fn new(params: &UrnParams) -> Self {
        let sum = params.p_b() + params.p_w();
        Self {
            t_w: params.p_b() / sum,
            t_b: params.p_w() / sum,
            c: params.u() + params.v(),
            lambda: params.lambda(),
        }
    }
}

/// Evaluates the published seven-term expression for `Var[M_n]`, with the
/// default cap on `n`.
pub fn published_variance(params: &UrnParams, n: u64) -> Result<f64> {
    published_variance_capped(params, n, DEFAULT_PUBLISHED_CAP)
}

/// As [`published_variance`] with an explicit cap; cost is cubic in `n`.
pub fn published_variance_capped(params: &UrnParams, n: u64, max_n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "the published formula needs n >= 2, got {n}"
        )));
    }
    if n > max_n {
        return Err(Error::Resource {
            what: "published-formula horizon",
            requested: n as u128,
            limit: max_n as u128,
        });
    }
    let mp = PublishedParams::new(params);
    let (t_w, t_b, lam) = (mp.t_w, mp.t_b, mp.lambda);
    let c = mp.c as f64;
    let (u, v) = (params.u() as f64, params.v() as f64);
    let g = gamma_ratio;
    let n_us = n as usize;
    let nf = n as f64;
    let skew = v * t_w - u * t_b;
    let drift = t_w - t_b;

    // Γ(c+j+λ)/Γ(c+j+1), shared innermost factor, indexed by j = 0..n-1
    let inner: Vec<f64> = (0..n_us)
        .map(|j| g(c + j as f64 + lam, c + j as f64 + 1.0))
        .collect();
    // Γ(c+2λ+k-1)/Γ(c+k+λ), indexed by k = 0..n-1 (k = 0 unused)
    let middle: Vec<f64> = (0..n_us)
        .map(|k| g(c + 2.0 * lam + k as f64 - 1.0, c + k as f64 + lam))
        .collect();

    let triple = |outer: &dyn Fn(usize) -> f64| -> f64 {
        let mut total = 0.0;
        for l in 1..=n_us.saturating_sub(2) {
            let mut mid_sum = 0.0;
            for k in l + 1..n_us {
                let mut in_sum = 0.0;
                for val in &inner[k..n_us] {
                    in_sum += val;
                }
                mid_sum += middle[k] * in_sum;
            }
            total += outer(l) * mid_sum;
        }
        total
    };

    let term1 = 2.0 * t_w * t_b * triple(&|l| g(c + l as f64, c + 2.0 * lam + l as f64));

    let term2 = 2.0
        * lam
        * drift
        * skew
        * g(c, c + lam)
        * triple(&|l| g(c + lam + l as f64 - 1.0, c + 2.0 * lam + l as f64));

    let term3 = {
        let s: f64 = inner.iter().sum();
        let base = skew * g(c, c + lam) * s;
        -(base * base)
    };

    let term4 = {
        let mut s = 0.0;
        for k in 1..n_us {
            let mut in_sum = 0.0;
            for val in &inner[k..n_us] {
                in_sum += val;
            }
            s += g(c + k as f64, c + k as f64 + lam) * in_sum;
        }
        nf * t_w * t_b + 2.0 * lam * t_w * t_b * s
    };

    let term5 = {
        let s: f64 = (1..=n_us)
            .map(|k| g(c + lam + k as f64 - 1.0, c + k as f64))
            .sum();
        drift * skew * g(c, c + lam) * s
    };

    let term6 = {
        let mut s = 0.0;
        for k in 1..n_us {
            let mut in_sum = 0.0;
            for j in k..n_us {
                in_sum += g(c + lam + j as f64, c + j as f64 + 1.0);
            }
            s += g(c + lam + k as f64 - 1.0, c + k as f64 + lam) * in_sum;
        }
        2.0 * lam * drift * skew * g(c, c + lam) * s
    };

    let term7 = {
        let mut s = 0.0;
        for j in 1..n_us {
            let mut k_sum = 0.0;
            for k in 1..=j {
                // Γ(c)/Γ(c+2λ) · Γ(c+2λ+k-1)/Γ(c+λ+k); the Γ(c+2λ) cancels at k = 1
                let rising = if k == 1 {
                    g(c, c + lam + 1.0)
                } else {
                    g(c, c + 2.0 * lam) * g(c + 2.0 * lam + k as f64 - 1.0, c + lam + k as f64)
                };
                k_sum += rising;
            }
            s += g(c + lam + j as f64, c + j as f64 + 1.0) * k_sum;
        }
        2.0 * skew * skew * s
    };

    let total = term1 + term2 + term3 + term4 + term5 + term6 + term7;
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "published variance formula is not finite at {params:?}, n = {n}"
        )));
    }
    Ok(total)
}

/// The first summand of the simplified expression at `p_w = p_b = 1/2`,
/// `u = v`: the part that exceeds the true variance `n / 4`.
pub fn published_excess(n: u64, c: u64) -> f64 {
    let c = c as f64;
    let n = n as usize;
    let mut total = 0.0;
    for l in 1..=n.saturating_sub(2) {
        for k in l + 1..n {
            let mut in_sum = 0.0;
            for j in k..n {
                in_sum += 1.0 / (c + j as f64);
            }
            total += in_sum / (c + k as f64 - 1.0);
        }
    }
    0.5 * total
}

/// The published formula simplified to `p_w = p_b = 1/2`, `u = v = c / 2`.
pub fn published_fair_coin(n: u64, c: u64) -> f64 {
    published_excess(n, c) + n as f64 / 4.0
}

/// Side-by-side comparison of the published and martingale variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComparison {
    pub n: u64,
    pub published_variance: f64,
    pub published_sd_rn: f64,
    pub correct_variance: f64,
    pub correct_sd_rn: f64,
    pub excess: f64,
}

pub fn compare(params: &UrnParams, n: u64) -> Result<VarianceComparison> {
    let published = published_variance(params, n)?;
    let correct = crate::martingale::var_mn(&crate::martingale::RpwCoeffs::new(params), n)?;
    let nf = n as f64;
    Ok(VarianceComparison {
        n,
        published_variance: published,
        published_sd_rn: published.sqrt() / nf,
        correct_variance: correct,
        correct_sd_rn: correct.sqrt() / nf,
        excess: published - correct,
    })
}
