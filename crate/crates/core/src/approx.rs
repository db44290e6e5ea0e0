//! Two-stage approximation of `R_n = M_n / n` for small switch probabilities.
//!
//! Stage one replaces the white count at a cut step `k` by `M_k*`, whose law
//! ignores all but the first colour change. Stage two replaces the whites
//! added between `k` and `n` by their conditional mean given `M_k`, computed
//! with the martingale moments of a restarted urn. The module also carries
//! the error bounds that go with each stage.

use serde::{Deserialize, Serialize};

use crate::bins::BinSpec;
use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::martingale::{moments_mn, RpwCoeffs};
use crate::numeric::{compensated_sum, ln_choose, ln_gamma, pow_one_minus};
use crate::urn::UrnParams;

const STAGE_ONE_TOL: f64 = 1e-10;

/// Beta-Binomial PMF with `k` trials and shapes `u`, `v`; zero off support.
pub fn beta_binomial_pmf(x: u64, k: u64, u: f64, v: f64) -> f64 {
    if x > k {
        return 0.0;
    }
    debug_assert!(u > 0.0 && v > 0.0);
    let ln_beta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let (xf, kf) = (x as f64, k as f64);
    (ln_choose(k, x) + ln_beta(xf + u, kf - xf + v) - ln_beta(u, v)).exp()
}

/// Law of the approximate white count `M_k*` at the cut step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOneDist {
    pub k: u64,
    pub dist: DiscreteDist,
}

impl StageOneDist {
    pub fn prob(&self, x: u64) -> f64 {
        self.dist.prob(x as i64)
    }
}

/// Tail of `M_k*` when the urn starts with no white balls: the law of the
/// white count given exactly one colour change in the first `k` steps.
fn single_change_tail(k: u64, v: f64, x: u64) -> f64 {
    let (kf, xf) = (k as f64, x as f64);
    let ln_ratio =
        ln_gamma(kf) + ln_gamma(kf + v - xf) - ln_gamma(kf + v) - ln_gamma(kf - xf + 1.0);
    ln_ratio.exp() * (kf + (v - 1.0) * xf + v) / (xf * (xf + 1.0))
}

pub fn mkstar_pmf(params: &UrnParams, k: u64) -> Result<StageOneDist> {
    if k == 0 {
        return Err(Error::Domain("cut step k must be at least 1".into()));
    }
    let masses = match (params.u(), params.v()) {
        (0, v) => {
            let v = v as f64;
            let none = pow_one_minus(params.p_b(), k as f64);
            let some = -(k as f64 * (-params.p_b()).ln_1p()).exp_m1();
            let mut masses = Vec::with_capacity(k as usize + 1);
            masses.push(none);
            masses.extend((1..=k).map(|x| single_change_tail(k, v, x) * some));
            masses
        }
        (_, 0) => {
            let mut mirrored = mkstar_pmf(&params.swapped(), k)?.dist.into_masses();
            mirrored.reverse();
            mirrored
        }
        (u, v) => (0..=k)
            .map(|x| beta_binomial_pmf(x, k, u as f64, v as f64))
            .collect(),
    };
    Ok(StageOneDist {
        k,
        dist: DiscreteDist::with_tolerance(0, masses, STAGE_ONE_TOL)?,
    })
}

/// Starting composition of the urn restarted at the cut step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Composition {
    /// `(M_k, k - M_k)`: the original `u`, `v` are dropped.
    #[default]
    CutOnly,
    /// `(u + M_k, v + k - M_k)`: the actual urn contents at step `k`.
    Exact,
}

impl Composition {
    fn base(self, params: &UrnParams) -> (f64, f64) {
        match self {
            Composition::CutOnly => (0.0, 0.0),
            Composition::Exact => (params.u() as f64, params.v() as f64),
        }
    }
}

fn check_cut(n: u64, k: u64) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "cut step k = {k} must satisfy 1 <= k < n = {n}"
        )));
    }
    Ok(())
}

/// Conditional mean and variance of the whites added between steps `k` and
/// `n`, given `x` whites at the cut.
pub fn drift_mu_sigma(
    params: &UrnParams,
    n: u64,
    k: u64,
    x: u64,
    composition: Composition,
) -> Result<(f64, f64)> {
    check_cut(n, k)?;
    if x > k {
        return Err(Error::Contract(format!(
            "white count x = {x} exceeds cut step k = {k}"
        )));
    }
    let (w0, b0) = composition.base(params);
    let src = RpwCoeffs::from_composition(
        w0 + x as f64,
        b0 + (k - x) as f64,
        params.p_w(),
        params.p_b(),
    );
    moments_mn(&src, n - k)
}

/// `c0 + c1 x + c2 x^2`.
#[derive(Debug, Clone, Copy, Default)]
struct Quad([f64; 3]);

impl Quad {
    fn affine(c0: f64, c1: f64) -> Self {
        Quad([c0, c1, 0.0])
    }

    /// Product of two affine polynomials.
    fn mul_affine(self, o: Quad) -> Self {
        let [a0, a1, _] = self.0;
        let [b0, b1, _] = o.0;
        Quad([a0 * b0, a0 * b1 + a1 * b0, a1 * b1])
    }

    fn scale(self, s: f64) -> Self {
        Quad(self.0.map(|c| c * s))
    }

    fn add(self, o: Quad) -> Self {
        Quad([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    fn eval(self, x: f64) -> f64 {
        (self.0[2] * x + self.0[1]) * x + self.0[0]
    }
}

/// `mu` and `sigma2` for every white count `x = 0..=k` at the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTable {
    pub n: u64,
    pub k: u64,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl DriftTable {
    /// Builds the table in one pass over the horizon.
    ///
    /// The restarted urn always holds the same number of balls whatever `x`
    /// is, so `a_i` and `q_i` do not depend on `x`, `b_i` and `d_i` are affine
    /// in `x`, and `e_i` is quadratic. The martingale recurrences are run on
    /// polynomial coefficients and evaluated at each `x` at the end.
    pub fn new(params: &UrnParams, n: u64, k: u64, composition: Composition) -> Result<Self> {
        check_cut(n, k)?;
        let (pw, pb) = (params.p_w(), params.p_b());
        let lambda = params.lambda();
        let (w0, b0) = composition.base(params);
        let kf = k as f64;
        let start_total = w0 + b0 + kf;

        let mut q_prev = 1.0f64;
        let mut s_prev = Quad::default();
        let mut var_x = Quad::default();
        for i in 0..n - k {
            let i = i as f64;
            let total = start_total + i;
            let total2 = total * total;
            let a = 1.0 + lambda / total;
            let qi = q_prev * a;
            if !qi.is_finite() || qi == 0.0 {
                return Err(Error::Numeric(format!(
                    "running product left the representable range at step {i}"
                )));
            }
            // blacks at step i are b0 + k - x + i; whites w0 + x
            let blacks0 = b0 + kf + i;
            let b = Quad::affine((pb * blacks0 + (1.0 - pw) * w0) / total, lambda / total);
            let c = -(lambda * lambda) / total2;
            let d = Quad::affine(
                2.0 * pb * blacks0 - i + w0 * (1.0 - 2.0 * pw) - b0 - kf,
                2.0 * lambda,
            )
            .scale(-lambda / total2);
            let f = Quad::affine((1.0 - pb) * blacks0 + w0 * pw, -lambda);
            let g = Quad::affine(pb * blacks0 + w0 * (1.0 - pw), lambda);
            let e = f.mul_affine(g).scale(1.0 / total2);

            let mean = s_prev.scale(q_prev);
            let num = mean
                .mul_affine(mean)
                .scale(c)
                .add(d.mul_affine(mean))
                .add(e);
            var_x = var_x
                .scale(c / (a * a) + 1.0)
                .add(num.scale(1.0 / (qi * qi)));
            s_prev = s_prev.add(b.scale(1.0 / qi));
            q_prev = qi;
        }

        let (mu, sigma2) = (0..=k)
            .map(|x| {
                let x = x as f64;
                let mu = q_prev * s_prev.eval(x);
                let var = q_prev * q_prev * var_x.eval(x);
                (mu, var.max(0.0))
            })
            .unzip();
        Ok(Self { n, k, mu, sigma2 })
    }

    /// Builds the table by running [`drift_mu_sigma`] independently for each
    /// `x`. Quadratic cost; used to cross-check [`DriftTable::new`].
    pub fn direct(
        params: &UrnParams,
        n: u64,
        k: u64,
        composition: Composition,
        exec: Exec,
    ) -> Result<Self> {
        check_cut(n, k)?;
        let rows = exec.map_indexed(k as usize + 1, |x| {
            drift_mu_sigma(params, n, k, x as u64, composition)
        });
        let (mu, sigma2) = rows
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self { n, k, mu, sigma2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Atoms of the approximate law of `R_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRnPmf {
    pub n: u64,
    pub k: u64,
    pub atoms: Vec<Atom>,
}

impl ApproxRnPmf {
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.mass))
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.location * a.mass))
    }
}

pub fn approx_rn_pmf(
    params: &UrnParams,
    n: u64,
    k: u64,
    composition: Composition,
) -> Result<ApproxRnPmf> {
    let stage_one = mkstar_pmf(params, k)?;
    let drift = DriftTable::new(params, n, k, composition)?;
    Ok(assemble(&stage_one, &drift))
}

pub(crate) fn assemble(stage_one: &StageOneDist, drift: &DriftTable) -> ApproxRnPmf {
    let nf = drift.n as f64;
    let atoms = stage_one
        .dist
        .masses()
        .iter()
        .zip(&drift.mu)
        .enumerate()
        .map(|(x, (&mass, &mu))| Atom {
            location: ((x as f64 + mu) / nf).clamp(0.0, 1.0),
            mass,
        })
        .collect();
    ApproxRnPmf {
        n: drift.n,
        k: drift.k,
        atoms,
    }
}

/// Multiplicative and additive constants of the stage-one sandwich:
/// `lower_factor * P(M_k* = x) <= P(M_k = x) <= upper_factor * P(M_k* = x) + slack`.
///
/// When the urn starts one-coloured these apply to `x` away from the
/// no-change atom; that atom is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOneFactors {
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub slack: f64,
}

pub fn stage_one_factors(params: &UrnParams, k: u64) -> StageOneFactors {
    let kf = k as f64;
    let (p_min, p_max) = (params.p_min(), params.p_max());
    if params.u() > 0 && params.v() > 0 {
        let no_change_max = pow_one_minus(p_max, kf);
        return StageOneFactors {
            lower_factor: no_change_max,
            upper_factor: pow_one_minus(p_min, kf),
            slack: 1.0 - no_change_max,
        };
    }
    // one-coloured start; the switch that can happen first is governed by
    // p_b when only black balls are present (mirror otherwise)
    let p_first = if params.u() == 0 {
        params.p_b()
    } else {
        params.p_w()
    };
    let some_change = -(kf * (-p_first).ln_1p()).exp_m1();
    let one_change_lo = kf * p_first * pow_one_minus(p_max, kf - 1.0);
    let one_change_hi = kf * p_first * pow_one_minus(p_min, kf - 1.0);
    StageOneFactors {
        lower_factor: one_change_lo / some_change,
        upper_factor: one_change_hi / some_change,
        slack: some_change - one_change_lo,
    }
}

/// Bounds on `P(M_k = x)` given the approximate mass `P(M_k* = x)`.
pub fn stage_one_bounds(
    params: &UrnParams,
    k: u64,
    x: u64,
    approx_mass: f64,
) -> Result<(f64, f64)> {
    if x > k {
        return Err(Error::Contract(format!("x = {x} outside support 0..={k}")));
    }
    let exact_atom = match (params.u(), params.v()) {
        (0, _) => Some(0),
        (_, 0) => Some(k),
        _ => None,
    };
    if exact_atom == Some(x) {
        return Ok((approx_mass, approx_mass));
    }
    let f = stage_one_factors(params, k);
    Ok((
        approx_mass * f.lower_factor,
        approx_mass * f.upper_factor + f.slack,
    ))
}

/// Chebyshev radius `t * sigma / n` for `R_n` around its drift location,
/// and the probability bound `1 / t^2` for leaving it.
pub fn chebyshev_bound(sigma2: f64, n: u64, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) || !(sigma2 >= 0.0) || n == 0 {
        return Err(Error::Contract(format!(
            "need t > 0, sigma2 >= 0, n > 0 (t = {t}, sigma2 = {sigma2}, n = {n})"
        )));
    }
    Ok((t * sigma2.sqrt() / n as f64, 1.0 / (t * t)))
}

/// Upper bound `1 / 4k` on `sigma2 / n^2`.
pub fn drift_variance_bound(k: u64) -> f64 {
    assert!(k >= 1, "k must be positive");
    1.0 / (4.0 * k as f64)
}

/// Cut-step heuristic `k = p^(-2/3)`, rounded.
pub fn choose_k(p: f64) -> u64 {
    (p.powf(-2.0 / 3.0).round() as u64).max(1)
}

/// [`choose_k`] clamped into `[1, n - 1]`.
pub fn choose_k_clamped(p: f64, n: u64) -> u64 {
    choose_k(p).clamp(1, n.saturating_sub(1).max(1))
}

/// `(bin centre, log density)` for each bin holding positive mass.
///
/// Atoms outside `[lo, hi]` are dropped. With `renormalize` the in-range
/// mass is rescaled to one.
pub fn log_density_on_bins(
    pmf: &ApproxRnPmf,
    bins: &BinSpec,
    renormalize: bool,
) -> Vec<(f64, f64)> {
    let mut mass = vec![0.0f64; bins.count()];
    for atom in &pmf.atoms {
        if let Some(i) = bins.index(atom.location) {
            mass[i] += atom.mass;
        }
    }
    let scale = if renormalize {
        let inside: f64 = compensated_sum(mass.iter().copied());
        if inside > 0.0 {
            1.0 / inside
        } else {
            1.0
        }
    } else {
        1.0
    };
    let width = bins.width();
    mass.iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| (bins.center(i), (m * scale / width).ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::moments_of;
    use crate::urn::{exact_pmf_dp, DpOracle};
    use proptest::prelude::*;

    fn params(u: u64, v: u64, pw: f64, pb: f64) -> UrnParams {
        UrnParams::new(u, v, pw, pb).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    // Plain Pólya reinforcement enumerated sequence by sequence.
    fn polya_sequence_pmf(k: u32, u: f64, v: f64) -> Vec<f64> {
        let mut pmf = vec![0.0; k as usize + 1];
        for seq in 0u32..(1 << k) {
            let (mut w, mut b, mut prob) = (u, v, 1.0);
            for step in 0..k {
                if seq >> step & 1 == 1 {
                    prob *= w / (w + b);
                    w += 1.0;
                } else {
                    prob *= b / (w + b);
                    b += 1.0;
                }
            }
            pmf[seq.count_ones() as usize] += prob;
        }
        pmf
    }

    #[test]
    fn beta_binomial_uniform_cases() {
        assert!((beta_binomial_pmf(0, 1, 1.0, 1.0) - 0.5).abs() < 1e-15);
        for k in [1u64, 5, 40, 1000] {
            for x in [0, k / 2, k] {
                assert!(rel(beta_binomial_pmf(x, k, 1.0, 1.0), 1.0 / (k + 1) as f64) < 1e-12);
            }
        }
        assert_eq!(beta_binomial_pmf(6, 5, 1.0, 1.0), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn beta_binomial_matches_sequence_enumeration(k in 0u32..=12, u in 0.1f64..5.0, v in 0.1f64..5.0) {
            let brute = polya_sequence_pmf(k, u, v);
            for (x, want) in brute.iter().enumerate() {
                let got = beta_binomial_pmf(x as u64, k as u64, u, v);
                prop_assert!((got - want).abs() < 1e-12, "x={} got={} want={}", x, got, want);
            }
        }

        #[test]
        fn mirror_reverses_stage_one(u in 1u64..6, k in 1u64..60, pw in 0.001f64..0.2, pb in 0.001f64..0.2) {
            let white_only = params(u, 0, pw, pb);
            let black_only = white_only.swapped();
            let a = mkstar_pmf(&white_only, k).unwrap();
            let b = mkstar_pmf(&black_only, k).unwrap();
            for x in 0..=k {
                prop_assert_eq!(a.prob(x), b.prob(k - x));
            }
        }
    }

    #[test]
    fn stage_one_small_examples() {
        let s = mkstar_pmf(&params(1, 1, 0.2, 0.3), 1).unwrap();
        assert!((s.prob(0) - 0.5).abs() < 1e-15 && (s.prob(1) - 0.5).abs() < 1e-15);

        let pb = 0.013;
        let s = mkstar_pmf(&params(0, 1, 0.004, pb), 2).unwrap();
        let none = (1.0 - pb) * (1.0 - pb);
        assert!((s.prob(0) - none).abs() < 1e-15);
        assert!((s.prob(1) - 0.75 * (1.0 - none)).abs() < 1e-15);
        assert!((s.prob(2) - 0.25 * (1.0 - none)).abs() < 1e-15);

        let s = mkstar_pmf(&params(0, 1, 1e-6 / 3.0, 1e-6), 10_000).unwrap();
        assert!((s.prob(0) - (1.0f64 - 1e-6).powi(10_000)).abs() < 1e-12);
        assert!((s.prob(0) - 0.990_05).abs() < 1e-5);
    }

    #[test]
    fn stage_one_tail_equals_marginalization_over_first_change() {
        // (1/k) sum_s BB(x - 1; k - s, 1, v + s - 1)
        for v in [1u64, 2, 3, 7] {
            for k in [1u64, 2, 9, 25] {
                for x in 1..=k {
                    let marg: f64 = (1..=k)
                        .map(|s| {
                            if x - 1 > k - s {
                                0.0
                            } else {
                                beta_binomial_pmf(x - 1, k - s, 1.0, (v + s - 1) as f64)
                            }
                        })
                        .sum::<f64>()
                        / k as f64;
                    let closed = single_change_tail(k, v as f64, x);
                    assert!(
                        (closed - marg).abs() < 1e-12,
                        "v={v} k={k} x={x}: {closed} vs {marg}"
                    );
                }
            }
        }
    }

    #[test]
    fn stage_one_normalization_large_k() {
        for k in [10u64, 100, 1000, 10_000, 100_000] {
            for p in [
                params(0, 1, 1e-6 / 3.0, 1e-6),
                params(2, 3, 0.01, 0.02),
                params(0, 4, 0.001, 0.003),
            ] {
                let s = mkstar_pmf(&p, k).unwrap();
                let total = compensated_sum(s.dist.masses().iter().copied());
                assert!((total - 1.0).abs() < 1e-10, "k={k}: {total}");
            }
        }
    }

    #[test]
    fn drift_closed_forms() {
        // p_w + p_b = 1 makes a_i = 1, b_i = p_b
        let p = params(0, 1, 0.35, 0.65);
        for x in [0, 3, 10] {
            let (mu, _) = drift_mu_sigma(&p, 50, 10, x, Composition::CutOnly).unwrap();
            assert!(rel(mu, 40.0 * 0.65) < 1e-13);
        }
        let sym = params(1, 1, 0.5, 0.5);
        for x in [0, 4, 7] {
            let (mu, s2) = drift_mu_sigma(&sym, 100, 7, x, Composition::CutOnly).unwrap();
            assert!(rel(mu, 93.0 / 2.0) < 1e-13);
            assert!(rel(s2, 93.0 / 4.0) < 1e-12);
        }
        assert!(drift_mu_sigma(&sym, 10, 10, 0, Composition::CutOnly).is_err());
        assert!(drift_mu_sigma(&sym, 10, 0, 0, Composition::CutOnly).is_err());
        assert!(drift_mu_sigma(&sym, 10, 3, 4, Composition::CutOnly).is_err());
    }

    #[test]
    fn drift_matches_dp_on_restarted_urn() {
        let (n, k) = (40u64, 10u64);
        for p in [params(0, 1, 0.03, 0.09), params(2, 1, 0.2, 0.1)] {
            for x in 0..=k {
                let restart = p.with_composition(x, k - x).unwrap();
                let (m_dp, v_dp) = moments_of(&exact_pmf_dp(&restart, n - k).unwrap());
                let (mu, s2) = drift_mu_sigma(&p, n, k, x, Composition::CutOnly).unwrap();
                assert!(rel(mu, m_dp) < 1e-9, "x={x}");
                assert!(rel(s2, v_dp) < 1e-9, "x={x}");
            }
        }
    }

    #[test]
    fn exact_composition_keeps_initial_balls() {
        let p = params(2, 3, 0.1, 0.05);
        let (n, k) = (60u64, 12u64);
        for x in [0u64, 5, 12] {
            let restart = p.with_composition(2 + x, 3 + k - x).unwrap();
            let (m_dp, v_dp) = moments_of(&DpOracle::default().pmf(&restart, n - k).unwrap());
            let (mu, s2) = drift_mu_sigma(&p, n, k, x, Composition::Exact).unwrap();
            assert!(rel(mu, m_dp) < 1e-9);
            assert!(rel(s2, v_dp) < 1e-9);
        }
    }

    #[test]
    fn polynomial_table_matches_direct() {
        for (p, n, k, comp) in [
            (
                params(0, 1, 1e-3 / 3.0, 1e-3),
                10_000,
                100,
                Composition::CutOnly,
            ),
            (params(1, 1, 0.1, 0.3), 500, 40, Composition::CutOnly),
            (params(3, 2, 0.02, 0.05), 2000, 200, Composition::Exact),
            (
                params(0, 1, 1e-5 / 3.0, 1e-5),
                100_000,
                2154,
                Composition::CutOnly,
            ),
        ] {
            let fast = DriftTable::new(&p, n, k, comp).unwrap();
            let slow = DriftTable::direct(&p, n, k, comp, Exec::Parallel).unwrap();
            for x in 0..=k as usize {
                assert!(
                    rel(fast.mu[x], slow.mu[x]) < 1e-11 || (fast.mu[x] - slow.mu[x]).abs() < 1e-12,
                    "mu x={x}: {} vs {}",
                    fast.mu[x],
                    slow.mu[x]
                );
                assert!(
                    rel(fast.sigma2[x], slow.sigma2[x]) < 1e-7
                        || (fast.sigma2[x] - slow.sigma2[x]).abs() < 1e-9,
                    "sigma2 x={x}: {} vs {}",
                    fast.sigma2[x],
                    slow.sigma2[x]
                );
            }
        }
    }

    #[test]
    fn direct_table_is_schedule_independent() {
        let p = params(0, 1, 0.01, 0.03);
        let a = DriftTable::direct(&p, 3000, 150, Composition::CutOnly, Exec::Sequential).unwrap();
        let b = DriftTable::direct(&p, 3000, 150, Composition::CutOnly, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_atoms_are_uniform() {
        let p = params(1, 1, 0.5, 0.5);
        let (n, k) = (200u64, 20u64);
        let pmf = approx_rn_pmf(&p, n, k, Composition::CutOnly).unwrap();
        for (x, atom) in pmf.atoms.iter().enumerate() {
            let want = (x as f64 + (n - k) as f64 / 2.0) / n as f64;
            assert!((atom.location - want).abs() < 1e-13);
            assert!((atom.mass - 1.0 / 21.0).abs() < 1e-13);
        }
    }

    #[test]
    fn worked_example_atoms() {
        let p = params(0, 1, 1e-6 / 3.0, 1e-6);
        let pmf = approx_rn_pmf(&p, 1_000_000, 10_000, Composition::CutOnly).unwrap();
        assert_eq!(pmf.atoms.len(), 10_001);
        assert!((pmf.atoms[0].mass - 0.990_05).abs() < 1e-5);
        let (mu0, _) = drift_mu_sigma(&p, 1_000_000, 10_000, 0, Composition::CutOnly).unwrap();
        assert!((pmf.atoms[0].location - mu0 / 1e6).abs() < 1e-15);
        assert!((pmf.total_mass() - 1.0).abs() < 1e-10);
        assert!(pmf.atoms.windows(2).all(|w| w[1].location > w[0].location));
        assert!(pmf
            .atoms
            .iter()
            .all(|a| (0.0..=1.0).contains(&a.location) && a.mass >= 0.0));
    }

    #[test]
    fn stage_one_worked_example_constants() {
        let p = params(0, 1, 1e-6 / 3.0, 1e-6);
        let f = stage_one_factors(&p, 10_000);
        assert!(rel(f.lower_factor, 0.995) < 5e-3);
        assert!(rel(f.upper_factor, 1.002) < 5e-3);
        assert!(rel(f.slack, 0.0000497) < 5e-3);
        let m0 = mkstar_pmf(&p, 10_000).unwrap().prob(0);
        assert_eq!(stage_one_bounds(&p, 10_000, 0, m0).unwrap(), (m0, m0));
    }

    fn assert_sandwich(p: &UrnParams, k: u64) {
        let exact = exact_pmf_dp(p, k).unwrap();
        let approx = mkstar_pmf(p, k).unwrap();
        for x in 0..=k {
            let (lo, hi) = stage_one_bounds(p, k, x, approx.prob(x)).unwrap();
            let e = exact.prob(x as i64);
            assert!(
                lo - 1e-14 <= e && e <= hi + 1e-14,
                "{p:?} k={k} x={x}: {lo} <= {e} <= {hi}"
            );
        }
    }

    #[test]
    fn sandwich_holds_on_small_instances() {
        assert_sandwich(&params(0, 1, 0.01, 0.02), 20);
        assert_sandwich(&params(2, 3, 0.02, 0.02), 20);
        assert_sandwich(&params(4, 0, 0.03, 0.01), 25);
        for k in [1u64, 5, 13, 30] {
            assert_sandwich(&params(1, 2, 0.05, 0.001), k);
            assert_sandwich(&params(0, 3, 0.04, 0.05), k);
        }
    }

    #[test]
    fn chebyshev_examples() {
        let (n, k) = (1_000_000u64, 10_000u64);
        let worst = (n as f64).powi(2) * drift_variance_bound(k);
        for t in [0.5, 1.0, 3.0, 10.0] {
            let (r, pb) = chebyshev_bound(worst, n, t).unwrap();
            assert!((r - t / 200.0).abs() < 1e-15);
            assert!((pb - 1.0 / (t * t)).abs() < 1e-15);
        }
        assert_eq!(chebyshev_bound(1.0, 10, 1.0).unwrap().1, 1.0);
        assert!(chebyshev_bound(1.0, 10, 0.0).is_err());
        assert!(chebyshev_bound(-1.0, 10, 1.0).is_err());
    }

    #[test]
    fn drift_variance_examples_and_sweep() {
        assert_eq!(drift_variance_bound(10_000), 2.5e-5);
        assert_eq!(drift_variance_bound(1), 0.25);
        for p in [
            params(0, 1, 0.01, 0.03),
            params(2, 5, 0.2, 0.4),
            params(1, 0, 0.45, 0.05),
        ] {
            for (n, k) in [(50u64, 5u64), (400, 20), (3000, 300)] {
                let t = DriftTable::new(&p, n, k, Composition::CutOnly).unwrap();
                let bound = drift_variance_bound(k);
                for s2 in &t.sigma2 {
                    assert!(s2 / (n * n) as f64 <= bound);
                }
            }
        }
    }

    #[test]
    fn choose_k_examples() {
        assert_eq!(choose_k(1e-6), 10_000);
        assert_eq!(choose_k(1e-3), 100);
        assert_eq!(choose_k(0.25), 3);
        assert_eq!(choose_k(1e-5), 2154);
        assert_eq!(choose_k_clamped(1e-8, 1000), 999);
        assert_eq!(choose_k_clamped(0.9, 1000), 1);
    }

    #[test]
    fn log_density_examples() {
        let single = ApproxRnPmf {
            n: 1,
            k: 1,
            atoms: vec![Atom {
                location: 0.005,
                mass: 1.0,
            }],
        };
        let bins = BinSpec::new(0.0, 0.01, 1).unwrap();
        let out = log_density_on_bins(&single, &bins, false);
        assert_eq!(out.len(), 1);
        assert!((out[0].1 - 100f64.ln()).abs() < 1e-12);

        let split = ApproxRnPmf {
            n: 1,
            k: 1,
            atoms: vec![
                Atom {
                    location: 0.1,
                    mass: 0.5,
                },
                Atom {
                    location: 0.9,
                    mass: 0.5,
                },
            ],
        };
        let bins = BinSpec::new(0.0, 0.5, 5).unwrap();
        let kept = log_density_on_bins(&split, &bins, false);
        assert_eq!(kept.len(), 1);
        assert!((kept[0].1 - (0.5f64 / 0.1).ln()).abs() < 1e-12);
        let renorm = log_density_on_bins(&split, &bins, true);
        assert!((renorm[0].1 - (1.0f64 / 0.1).ln()).abs() < 1e-12);
    }

    #[test]
    fn worked_example_log_density_tail_decreases() {
        let p = params(0, 1, 1e-6 / 3.0, 1e-6);
        let pmf = approx_rn_pmf(&p, 1_000_000, 10_000, Composition::CutOnly).unwrap();
        // bins twice as wide as the atom spacing, so none is empty
        let bins = BinSpec::new(0.0, 0.002, 10).unwrap();
        let dens = log_density_on_bins(&pmf, &bins, false);
        assert_eq!(dens.len(), 10);
        assert!(dens.windows(2).all(|w| w[1].1 < w[0].1));
    }
}
