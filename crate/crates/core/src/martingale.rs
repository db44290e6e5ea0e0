//! Exact finite-step moments through the martingale transform.
//!
//! Any process with `E[M_{i+1} | M_i] = a_i M_i + b_i` (`a_i != 0`) and
//! `Var[M_{i+1} | M_i] = c_i M_i^2 + d_i M_i + e_i` started at `M_0 = 0`
//! becomes a martingale after the affine rescaling
//! `X_i = M_i / q_{i-1} - s_{i-1}`, where `q_i = a_0 ... a_i` and
//! `s_i = sum_{j<=i} b_j / q_j`. The mean of `M_n` falls out of `E[X_n] = 0`
//! and the variance from a one-term forward recurrence on `Var[X_i]`.
//!
//! Boundary conventions: `q_{-1} = 1` and `s_{-1} = 0`.

use crate::error::{Error, Result};
use crate::urn::UrnParams;

/// Coefficients of the conditional mean (`a`, `b`) and conditional variance
/// (`c`, `d`, `e`) at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

/// A step-indexed supply of [`StepCoeffs`].
pub trait CoeffSource {
    fn coeffs(&self, i: u64) -> StepCoeffs;
}

impl<F> CoeffSource for F
where
    F: Fn(u64) -> StepCoeffs,
{
    fn coeffs(&self, i: u64) -> StepCoeffs {
        self(i)
    }
}

/// RPW coefficients for an urn that starts with `white` and `black` balls.
///
/// The composition is real-valued so the same source serves both the
/// original urn and the restarted urn used by the drift approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpwCoeffs {
    white: f64,
    black: f64,
    p_w: f64,
    p_b: f64,
}

impl RpwCoeffs {
    pub fn new(params: &UrnParams) -> Self {
        Self::from_composition(
            params.u() as f64,
            params.v() as f64,
            params.p_w(),
            params.p_b(),
        )
    }

    pub fn from_composition(white: f64, black: f64, p_w: f64, p_b: f64) -> Self {
        Self {
            white,
            black,
            p_w,
            p_b,
        }
    }
}

impl CoeffSource for RpwCoeffs {
    fn coeffs(&self, i: u64) -> StepCoeffs {
        let (u, v, pw, pb) = (self.white, self.black, self.p_w, self.p_b);
        let i = i as f64;
        let total = u + v + i;
        let total2 = total * total;
        let lambda = 1.0 - pb - pw;
        StepCoeffs {
            a: 1.0 + lambda / total,
            b: (pb * (v + i) + (1.0 - pw) * u) / total,
            c: -(lambda * lambda) / total2,
            d: (pb + pw - 1.0) * (2.0 * pb * (i + v) - i - 2.0 * u * pw + u - v) / total2,
            e: ((1.0 - pb) * (i + v) + u * pw) * (pb * (i + v) + u * (1.0 - pw)) / total2,
        }
    }
}

/// Coefficients of the original urn at step `i`.
pub fn rpw_coeffs(params: &UrnParams, i: u64) -> StepCoeffs {
    RpwCoeffs::new(params).coeffs(i)
}

/// Running products `q[i] = a_0 ... a_i` and sums `s[i] = sum_{j<=i} b_j / q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTables {
    pub q: Vec<f64>,
    pub s: Vec<f64>,
}

impl PrefixTables {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `q_{i-1}`, with `q_{-1} = 1`.
    pub fn q_before(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.q[i - 1]
        }
    }

    /// `s_{i-1}`, with `s_{-1} = 0`.
    pub fn s_before(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.s[i - 1]
        }
    }

    /// `X_i` for a white count `m` at step `i` (needs `i <= len`).
    pub fn transform(&self, i: usize, m: f64) -> f64 {
        m / self.q_before(i) - self.s_before(i)
    }
}

fn check_step(c: &StepCoeffs, i: u64, q: f64) -> Result<()> {
    if c.a == 0.0 {
        return Err(Error::Domain(format!(
            "a_{i} = 0; the martingale transform is undefined"
        )));
    }
    if !q.is_finite() || q == 0.0 {
        return Err(Error::Numeric(format!(
            "running product q_{i} = {q} left the representable range"
        )));
    }
    Ok(())
}

pub fn prefix_tables<S: CoeffSource + ?Sized>(source: &S, n: u64) -> Result<PrefixTables> {
    let mut q = Vec::with_capacity(n as usize);
    let mut s = Vec::with_capacity(n as usize);
    let (mut q_prev, mut s_prev) = (1.0, 0.0);
    for i in 0..n {
        let c = source.coeffs(i);
        let qi = q_prev * c.a;
        check_step(&c, i, qi)?;
        let si = s_prev + c.b / qi;
        q.push(qi);
        s.push(si);
        q_prev = qi;
        s_prev = si;
    }
    Ok(PrefixTables { q, s })
}

/// `E[M_n] = q_{n-1} s_{n-1}`; zero for `n = 0`.
pub fn mean_mn<S: CoeffSource + ?Sized>(source: &S, n: u64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let t = prefix_tables(source, n)?;
    let last = n as usize - 1;
    Ok(t.q[last] * t.s[last])
}

/// `Var[X_n] = sum_i gamma_i prod_{j>i} (alpha_j + 1)` by the forward
/// recurrence `v <- (alpha_k + 1) v + gamma_k`.
pub fn var_xn(alphas: &[f64], gammas: &[f64], n: usize) -> f64 {
    assert!(
        alphas.len() >= n && gammas.len() >= n,
        "coefficient sequences shorter than n = {n}"
    );
    alphas[..n]
        .iter()
        .zip(&gammas[..n])
        .fold(0.0, |v, (alpha, gamma)| (alpha + 1.0) * v + gamma)
}

/// The `(alpha_i, gamma_i)` sequences of the transformed process.
pub fn martingale_variance_coeffs<S: CoeffSource + ?Sized>(
    source: &S,
    tables: &PrefixTables,
) -> (Vec<f64>, Vec<f64>) {
    (0..tables.len())
        .map(|i| {
            let c = source.coeffs(i as u64);
            let (qp, sp, qi) = (tables.q_before(i), tables.s_before(i), tables.q[i]);
            let alpha = c.c / (c.a * c.a);
            let gamma = (c.c * qp * qp * sp * sp + c.d * qp * sp + c.e) / (qi * qi);
            (alpha, gamma)
        })
        .unzip()
}

/// `Var[M_n] = q_{n-1}^2 Var[X_n]`; zero for `n = 0`.
pub fn var_mn<S: CoeffSource + ?Sized>(source: &S, n: u64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let t = prefix_tables(source, n)?;
    let (alphas, gammas) = martingale_variance_coeffs(source, &t);
    let q_last = t.q[n as usize - 1];
    Ok(q_last * q_last * var_xn(&alphas, &gammas, n as usize))
}

/// Mean and variance in a single streaming pass with O(1) memory.
///
/// Same arithmetic as [`mean_mn`] and [`var_mn`]; used where the horizon is
/// large and many horizons are evaluated.
pub fn moments_mn<S: CoeffSource + ?Sized>(source: &S, n: u64) -> Result<(f64, f64)> {
    let (mut q_prev, mut s_prev, mut var_x) = (1.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let c = source.coeffs(i);
        let qi = q_prev * c.a;
        check_step(&c, i, qi)?;
        let gamma =
            (c.c * q_prev * q_prev * s_prev * s_prev + c.d * q_prev * s_prev + c.e) / (qi * qi);
        var_x = (c.c / (c.a * c.a) + 1.0) * var_x + gamma;
        s_prev += c.b / qi;
        q_prev = qi;
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((q_prev * s_prev, q_prev * q_prev * var_x))
}

/// Maps a white-count trajectory `m_0 = 0, m_1, ..., m_n` to `X_0, ..., X_n`.
pub fn martingale_transform<S: CoeffSource + ?Sized>(
    source: &S,
    trajectory: &[u64],
) -> Result<Vec<f64>> {
    match trajectory.first() {
        None => return Ok(Vec::new()),
        Some(&m0) if m0 != 0 => {
            return Err(Error::Contract(format!(
                "trajectory must start at 0, got {m0}"
            )))
        }
        _ => {}
    }
    let t = prefix_tables(source, trajectory.len() as u64 - 1)?;
    Ok(trajectory
        .iter()
        .enumerate()
        .map(|(i, &m)| t.transform(i, m as f64))
        .collect())
}
