//! Randomized play-the-winner urn: exact moments of the white-ball count,
//! a two-stage approximation to its law, simulation, and fitting the
//! colour-change rate to variant-frequency data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod bins;
pub mod data;
pub mod dist;
pub mod error;
pub mod exec;
pub mod fit;
pub mod martingale;
pub mod numeric;
pub mod output;
pub mod published;
pub mod simulate;
pub mod urn;

pub use approx::{approx_rn_pmf, mkstar_pmf, ApproxRnPmf, Composition, DriftTable};
pub use bins::{BinSpec, Histogram};
pub use error::{Error, Result};
pub use exec::Exec;
pub use fit::{fit_frequencies, fit_pb, FitConfig, FitResult};
pub use martingale::{mean_mn, moments_mn, var_mn, RpwCoeffs};
pub use simulate::{run_ensemble, EnsembleResult, Method, SimConfig};
pub use urn::UrnParams;
