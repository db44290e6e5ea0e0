//! Seeded Monte Carlo simulation of the urn.
//!
//! Replication `j` draws from ChaCha8 stream `j` of the master seed, so an
//! ensemble is a pure function of its [`SimConfig`] no matter how the
//! replications are scheduled. Aggregates are integer sums and merge exactly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use crate::bins::{BinSpec, Histogram};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::urn::{white_add_prob_unchecked, UrnParams};

pub const WORK_BUDGET_ENV: &str = "RPW_WORK_BUDGET";
pub const DEFAULT_WORK_BUDGET: u128 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    EventSkip,
    Auto,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::EventSkip => "event_skip",
            Method::Auto => "auto",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Method::Naive),
            "event_skip" | "event-skip" => Ok(Method::EventSkip),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidParams(format!(
                "unknown simulation method '{other}'"
            ))),
        }
    }
}

/// When [`Method::Auto`] switches to event skipping: `p_max < max_p` and
/// the expected number of potential events `p_max * n` is below
/// `max_event_fraction * n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoThresholds {
    pub max_p: f64,
    pub max_event_fraction: f64,
}

impl Default for AutoThresholds {
    fn default() -> Self {
        Self {
            max_p: 0.1,
            max_event_fraction: 0.05,
        }
    }
}

impl AutoThresholds {
    pub fn resolve(&self, method: Method, params: &UrnParams, n: u64) -> Method {
        match method {
            Method::Auto => {
                let p = params.p_max();
                let nf = n as f64;
                if p < self.max_p && p * nf < self.max_event_fraction * nf {
                    Method::EventSkip
                } else {
                    Method::Naive
                }
            }
            m => m,
        }
    }
}

/// Work budget from `RPW_WORK_BUDGET`, or the default.
pub fn work_budget_from_env() -> u128 {
    std::env::var(WORK_BUDGET_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|b| *b >= 0.0)
        .map(|b| b as u128)
        .unwrap_or(DEFAULT_WORK_BUDGET)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: UrnParams,
    pub n: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub method: Method,
    pub bins: BinSpec,
    pub auto: AutoThresholds,
    /// Upper limit on `replications * n`.
    pub work_budget: u128,
    pub exec: Exec,
}

impl SimConfig {
    /// Histogram over `[0, 1]` in 100 bins, automatic method choice, budget
    /// from the environment.
    pub fn new(params: UrnParams, n: u64, replications: u64, master_seed: u64) -> Self {
        Self {
            params,
            n,
            replications,
            master_seed,
            method: Method::Auto,
            bins: BinSpec::new(0.0, 1.0, 100).expect("static bin spec"),
            auto: AutoThresholds::default(),
            work_budget: work_budget_from_env(),
            exec: Exec::default(),
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_bins(mut self, bins: BinSpec) -> Self {
        self.bins = bins;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn resolved_method(&self) -> Method {
        self.auto.resolve(self.method, &self.params, self.n)
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParams(
                "replications must be at least 1".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        let work = self.replications as u128 * self.n as u128;
        if work > self.work_budget {
            return Err(Error::Resource {
                what: "simulation work (replications * n)",
                requested: work,
                limit: self.work_budget,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub bins: BinSpec,
    pub histogram: Histogram,
    /// Sample mean of `R_n`.
    pub sample_mean: f64,
    /// Unbiased sample variance of `R_n`.
    pub sample_var: f64,
    pub replications: u64,
    pub seed: u64,
    pub method: Method,
    pub n: u64,
    pub sum_mn: u128,
    pub sum_mn_sq: u128,
}

impl EnsembleResult {
    pub fn mean_mn(&self) -> f64 {
        self.sum_mn as f64 / self.replications as f64
    }

    /// Unbiased sample variance of `M_n`, from exact integer sums.
    pub fn var_mn(&self) -> f64 {
        let r = self.replications as u128;
        if r < 2 {
            return 0.0;
        }
        let num = r * self.sum_mn_sq - self.sum_mn * self.sum_mn;
        num as f64 / (r * (r - 1)) as f64
    }
}

/// Generator for replication `index` under `master_seed`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Steps the urn one draw at a time and returns `M_n`.
pub fn simulate_naive<R: Rng + ?Sized>(params: &UrnParams, n: u64, rng: &mut R) -> u64 {
    let mut m = 0u64;
    for i in 0..n {
        if rng.random::<f64>() < white_add_prob_unchecked(params, i, m) {
            m += 1;
        }
    }
    m
}

/// Whites added by `steps` draws of plain Pólya reinforcement from
/// `white`/`black` balls: Beta-Binomial, sampled as a Beta draw (two Gamma
/// draws) followed by a Binomial draw.
pub fn sample_polya_run<R: Rng + ?Sized>(steps: u64, white: u64, black: u64, rng: &mut R) -> u64 {
    if steps == 0 || white == 0 {
        return 0;
    }
    if black == 0 {
        return steps;
    }
    let gw = Gamma::new(white as f64, 1.0)
        .expect("positive shape")
        .sample(rng);
    let gb = Gamma::new(black as f64, 1.0)
        .expect("positive shape")
        .sample(rng);
    let p = gw / (gw + gb);
    if !(p > 0.0) {
        return 0;
    }
    if p >= 1.0 {
        return steps;
    }
    Binomial::new(steps, p).expect("p in (0, 1)").sample(rng)
}

/// Exact accelerated sampler for small switch probabilities.
///
/// Each step is a potential switch with probability `p_max`, independently
/// of the draw. Runs of non-potential steps are plain Pólya reinforcement and
/// are sampled in one go; at a potential step the drawn colour actually
/// switches with probability `p_colour / p_max`. Same law as
/// [`simulate_naive`].
pub fn simulate_event_skip<R: Rng + ?Sized>(params: &UrnParams, n: u64, rng: &mut R) -> u64 {
    let p_max = params.p_max();
    let geometric = Geometric::new(p_max).expect("p_max in (0, 1)");
    let accept_w = params.p_w() / p_max;
    let accept_b = params.p_b() / p_max;
    let (u, v) = (params.u(), params.v());
    let (mut i, mut m) = (0u64, 0u64);
    while i < n {
        let remaining = n - i;
        let gap = geometric.sample(rng);
        let run = gap.min(remaining);
        m += sample_polya_run(run, u + m, v + i - m, rng);
        i += run;
        if gap >= remaining {
            break;
        }
        let (white, total) = (u + m, u + v + i);
        let drew_white = rng.random_range(0..total) < white;
        let switched = rng.random::<f64>() < if drew_white { accept_w } else { accept_b };
        if drew_white != switched {
            m += 1;
        }
        i += 1;
    }
    m
}

fn simulate_one(params: &UrnParams, n: u64, method: Method, rng: &mut ChaCha8Rng) -> u64 {
    match method {
        Method::EventSkip => simulate_event_skip(params, n, rng),
        _ => simulate_naive(params, n, rng),
    }
}

/// `M_n` for every replication, in replication order.
pub fn simulate_values(config: &SimConfig) -> Result<Vec<u64>> {
    config.validate()?;
    let method = config.resolved_method();
    let (params, n, seed) = (config.params, config.n, config.master_seed);
    Ok(config.exec.map_indexed(config.replications as usize, |j| {
        simulate_one(&params, n, method, &mut replication_rng(seed, j as u64))
    }))
}

struct Tally {
    histogram: Histogram,
    sum: u128,
    sum_sq: u128,
}

pub fn run_ensemble(config: &SimConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let method = config.resolved_method();
    let (params, n, seed, bins) = (config.params, config.n, config.master_seed, config.bins);
    let nf = n as f64;

    let tally = config.exec.fold_indexed(
        config.replications,
        || Tally {
            histogram: Histogram::empty(&bins),
            sum: 0,
            sum_sq: 0,
        },
        |mut t, j| {
            let m = simulate_one(&params, n, method, &mut replication_rng(seed, j));
            t.histogram.record(&bins, m as f64 / nf);
            t.sum += m as u128;
            t.sum_sq += (m as u128) * (m as u128);
            t
        },
        |a, b| Tally {
            histogram: a.histogram.merge(b.histogram),
            sum: a.sum + b.sum,
            sum_sq: a.sum_sq + b.sum_sq,
        },
    );

    let mut result = EnsembleResult {
        bins,
        histogram: tally.histogram,
        sample_mean: 0.0,
        sample_var: 0.0,
        replications: config.replications,
        seed,
        method,
        n,
        sum_mn: tally.sum,
        sum_mn_sq: tally.sum_sq,
    };
    result.sample_mean = result.mean_mn() / nf;
    result.sample_var = result.var_mn() / (nf * nf);
    Ok(result)
}
