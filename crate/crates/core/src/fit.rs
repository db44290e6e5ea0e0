//! Least-squares estimation of `p_b` from variant-frequency data.
//!
//! The approximate law of `R_n` and the empirical frequencies are both
//! binned into log densities; the objective is the sum of squared
//! differences over bins that are non-empty on both sides. `p_w` is tied to
//! `p_b` by a fixed ratio, so the search is one-dimensional: a log-spaced
//! grid followed by golden-section refinement around the best grid point.

use serde::{Deserialize, Serialize};

use crate::approx::{approx_rn_pmf, choose_k_clamped, ApproxRnPmf, Composition};
use crate::bins::BinSpec;
use crate::data::{filter_observations, SiteObservation};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::urn::UrnParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBin {
    pub center: f64,
    pub log_density: f64,
    pub count: u64,
}

/// Per-bin counts of `freqs` over `bins`.
pub fn bin_counts(freqs: &[f64], bins: &BinSpec) -> Vec<u64> {
    let mut counts = vec![0u64; bins.count()];
    for &f in freqs {
        if let Some(i) = bins.index(f) {
            counts[i] += 1;
        }
    }
    counts
}

fn empirical_densities(
    freqs: &[f64],
    bins: &BinSpec,
    renormalize: bool,
) -> Vec<Option<(f64, u64)>> {
    let counts = bin_counts(freqs, bins);
    let total = if renormalize {
        counts.iter().sum::<u64>()
    } else {
        freqs.len() as u64
    };
    let width = bins.width();
    counts
        .into_iter()
        .map(|c| (c > 0).then(|| ((c as f64 / (total as f64 * width)).ln(), c)))
        .collect()
}

/// Histogram log density of `freqs`; empty bins are omitted.
///
/// Out-of-range values count towards the total unless `renormalize` is set,
/// in which case densities are relative to the in-range count.
pub fn empirical_log_density(
    freqs: &[f64],
    bins: &BinSpec,
    renormalize: bool,
) -> Vec<EmpiricalBin> {
    empirical_densities(freqs, bins, renormalize)
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| {
            d.map(|(log_density, count)| EmpiricalBin {
                center: bins.center(i),
                log_density,
                count,
            })
        })
        .collect()
}

/// Model log density per bin (`None` for bins without mass).
pub fn model_densities(pmf: &ApproxRnPmf, bins: &BinSpec, renormalize: bool) -> Vec<Option<f64>> {
    let mut mass = vec![0.0f64; bins.count()];
    for atom in &pmf.atoms {
        if let Some(i) = bins.index(atom.location) {
            mass[i] += atom.mass;
        }
    }
    let inside: f64 = mass.iter().sum();
    let scale = if renormalize && inside > 0.0 {
        1.0 / inside
    } else {
        1.0
    };
    let width = bins.width();
    mass.into_iter()
        .map(|m| (m > 0.0).then(|| (m * scale / width).ln()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// `p_b / p_w`; 3 under equal substitution rates.
    pub ratio: f64,
    /// Population size (urn steps).
    pub n: u64,
    /// Fixed cut step; `None` picks `choose_k(p_b)` per candidate.
    pub k: Option<u64>,
    pub u: u64,
    pub v: u64,
    pub min_depth: u64,
    pub max_strand_bias: f64,
    pub bins: BinSpec,
    /// Search interval for `log10 p_b`.
    pub log10_range: (f64, f64),
    pub grid_points: usize,
    /// Refinement stops once the bracket is this narrow relative to `p_b`.
    pub rel_tol: f64,
    pub composition: Composition,
    pub renormalize: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ratio: 3.0,
            n: 1_000_000,
            k: None,
            u: 0,
            v: 1,
            min_depth: 1000,
            max_strand_bias: 10.0,
            bins: BinSpec::new(0.0, 0.002, 100).expect("static bin spec"),
            log10_range: (-8.0, -4.0),
            grid_points: 41,
            rel_tol: 1e-3,
            composition: Composition::CutOnly,
            renormalize: false,
            exec: Exec::default(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.log10_range;
        if !(lo < hi) || !(hi < 0.0) {
            return Err(Error::InvalidParams(format!(
                "log10 search range [{lo}, {hi}] must be increasing and below 0"
            )));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::InvalidParams("ratio must be positive".into()));
        }
        if self.grid_points < 3 {
            return Err(Error::InvalidParams("need at least 3 grid points".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParams("n must be at least 2".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParams("rel_tol must be positive".into()));
        }
        Ok(())
    }

    /// Model parameters for candidate `p_b`.
    pub fn params_for(&self, p_b: f64) -> Result<UrnParams> {
        UrnParams::new(self.u, self.v, p_b / self.ratio, p_b)
    }

    pub fn k_for(&self, p_b: f64) -> u64 {
        self.k
            .map(|k| k.clamp(1, self.n - 1))
            .unwrap_or_else(|| choose_k_clamped(p_b, self.n))
    }

    pub fn model_for(&self, p_b: f64) -> Result<ApproxRnPmf> {
        approx_rn_pmf(
            &self.params_for(p_b)?,
            self.n,
            self.k_for(p_b),
            self.composition,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p_b_hat: f64,
    /// `(p_b, objective)` for every evaluated candidate, sorted by `p_b`.
    pub objective_curve: Vec<(f64, f64)>,
    pub filtered_count: usize,
    pub used_bins: usize,
    pub warnings: Vec<String>,
}

/// Prepared empirical side of the objective.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    config: &'a FitConfig,
    data: Vec<Option<f64>>,
}

impl<'a> Objective<'a> {
    pub fn new(freqs: &[f64], config: &'a FitConfig) -> Self {
        let data = empirical_densities(freqs, &config.bins, config.renormalize)
            .into_iter()
            .map(|d| d.map(|(ld, _)| ld))
            .collect();
        Self { config, data }
    }

    pub fn data_bins(&self) -> usize {
        self.data.iter().flatten().count()
    }

    /// Sum of squared log-density differences and the number of bins used.
    /// Infinite when no bin is shared.
    pub fn eval(&self, p_b: f64) -> Result<(f64, usize)> {
        let model = model_densities(
            &self.config.model_for(p_b)?,
            &self.config.bins,
            self.config.renormalize,
        );
        let (sum, used) = model
            .iter()
            .zip(&self.data)
            .filter_map(|(m, d)| Some((m.as_ref()? - d.as_ref()?).powi(2)))
            .fold((0.0, 0usize), |(s, n), sq| (s + sq, n + 1));
        Ok(if used == 0 {
            (f64::INFINITY, 0)
        } else {
            (sum, used)
        })
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Fits `p_b` to observed rows after depth/strand-bias filtering.
pub fn fit_pb(obs: &[SiteObservation], config: &FitConfig) -> Result<FitResult> {
    let kept = filter_observations(obs, config.min_depth, config.max_strand_bias);
    let freqs: Vec<f64> = kept.iter().map(SiteObservation::frequency).collect();
    let mut result = fit_frequencies(&freqs, config)?;
    result.filtered_count = kept.len();
    Ok(result)
}

/// Fits `p_b` directly to a sample of frequencies.
pub fn fit_frequencies(freqs: &[f64], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let objective = Objective::new(freqs, config);
    if objective.data_bins() == 0 {
        return Err(Error::Domain(
            "no observations fall inside the frequency range".into(),
        ));
    }

    let (lo, hi) = config.log10_range;
    let g = config.grid_points;
    let grid: Vec<f64> = (0..g)
        .map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64)
        .collect();
    let grid_vals = config
        .exec
        .map_indexed(g, |i| objective.eval(10f64.powf(grid[i])))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // first strict minimum scanning upward, so ties go to the smaller p_b
    let best_i = (0..g).fold(0, |best, i| {
        if grid_vals[i].0 < grid_vals[best].0 {
            i
        } else {
            best
        }
    });
    if !grid_vals[best_i].0.is_finite() {
        return Err(Error::Domain(
            "no candidate shares a non-empty bin with the data".into(),
        ));
    }

    let mut evaluated: Vec<(f64, f64, usize)> = grid
        .iter()
        .zip(&grid_vals)
        .map(|(&x, &(f, used))| (x, f, used))
        .collect();

    // golden-section on log10 p_b inside the neighbouring grid cells
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(g - 1)];
    let tol = (1.0 + config.rel_tol).log10();
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective.eval(10f64.powf(c))?;
    let mut fd = objective.eval(10f64.powf(d))?;
    evaluated.push((c, fc.0, fc.1));
    evaluated.push((d, fd.0, fd.1));
    while b - a > tol {
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective.eval(10f64.powf(c))?;
            evaluated.push((c, fc.0, fc.1));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective.eval(10f64.powf(d))?;
            evaluated.push((d, fd.0, fd.1));
        }
    }

    evaluated.sort_by(|x, y| x.0.total_cmp(&y.0));
    evaluated.dedup_by(|x, y| x.0 == y.0);
    let best = evaluated
        .iter()
        .fold(None::<&(f64, f64, usize)>, |acc, e| match acc {
            Some(b) if b.1 <= e.1 => Some(b),
            _ => Some(e),
        })
        .expect("grid is non-empty");

    let mut warnings = Vec::new();
    if best_i == 0 || best_i == g - 1 {
        warnings.push(format!(
            "optimum at the boundary of the search range (log10 p_b = {:.3}); widen the range",
            grid[best_i]
        ));
    }

    Ok(FitResult {
        p_b_hat: 10f64.powf(best.0),
        objective_curve: evaluated
            .iter()
            .map(|&(x, f, _)| (10f64.powf(x), f))
            .collect(),
        filtered_count: freqs.len(),
        used_bins: best.2,
        warnings,
    })
}

/// Observed and fitted log densities side by side, one row per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub empirical_log_density: Option<f64>,
    pub model_log_density: Option<f64>,
}

pub fn overlay(freqs: &[f64], config: &FitConfig, p_b: f64) -> Result<Vec<OverlayRow>> {
    let bins = &config.bins;
    let data = empirical_densities(freqs, bins, config.renormalize);
    let model = model_densities(&config.model_for(p_b)?, bins, config.renormalize);
    Ok((0..bins.count())
        .map(|i| {
            let (bin_lo, bin_hi) = bins.edges(i);
            OverlayRow {
                bin_lo,
                bin_hi,
                count: data[i].map_or(0, |d| d.1),
                empirical_log_density: data[i].map(|d| d.0),
                model_log_density: model[i],
            }
        })
        .collect())
}
