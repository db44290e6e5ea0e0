//! Per-site read-count tables.
//!
//! Tab separated, one header row naming at least
//! `sample_id site depth alt_count strand_bias` (any order, extra columns
//! ignored). Lines starting with `#` are comments.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 5] = ["sample_id", "site", "depth", "alt_count", "strand_bias"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteObservation {
    pub sample_id: String,
    pub site: u64,
    pub depth: u64,
    pub alt_count: u64,
    pub strand_bias: f64,
}

impl SiteObservation {
    /// Variant allele frequency `alt_count / depth`; zero-depth rows give 0.
    pub fn frequency(&self) -> f64 {
        if self.depth == 0 {
            0.0
        } else {
            self.alt_count as f64 / self.depth as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, column: &str) -> std::result::Result<T, String> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| format!("column '{column}': cannot parse '{raw}'"))
}

fn parse_row(fields: &[&str; 5]) -> std::result::Result<SiteObservation, String> {
    let [sample_id, site, depth, alt, bias] = *fields;
    let obs = SiteObservation {
        sample_id: sample_id.trim().to_string(),
        site: parse_field(site, "site")?,
        depth: parse_field(depth, "depth")?,
        alt_count: parse_field(alt, "alt_count")?,
        strand_bias: parse_field(bias, "strand_bias")?,
    };
    if obs.site == 0 {
        return Err("site must be a positive genome coordinate".into());
    }
    if obs.alt_count > obs.depth {
        return Err(format!(
            "alt_count {} exceeds depth {}",
            obs.alt_count, obs.depth
        ));
    }
    if !(obs.strand_bias.is_finite() && obs.strand_bias >= 0.0) {
        return Err(format!(
            "strand_bias {} is not a non-negative number",
            obs.strand_bias
        ));
    }
    Ok(obs)
}

pub fn ingest_tsv(path: impl AsRef<Path>) -> Result<Vec<SiteObservation>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?;

    let header = reader.headers()?.clone();
    let mut index = [0usize; 5];
    let mut missing = Vec::new();
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        match header.iter().position(|h| h.trim() == name) {
            Some(i) => *slot = i,
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        let line = header.position().map_or(1, |p| p.line());
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            errors: vec![RowError {
                line,
                message: format!("missing column(s): {}", missing.join(", ")),
            }],
        });
    }

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fields = index.map(|i| record.get(i));
        if fields.iter().any(Option::is_none) {
            errors.push(RowError {
                line,
                message: format!(
                    "expected at least {} fields, found {}",
                    header.len(),
                    record.len()
                ),
            });
            continue;
        }
        match parse_row(&fields.map(|f| f.unwrap_or_default())) {
            Ok(obs) => rows.push(obs),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            errors,
        });
    }
    if rows.is_empty() {
        log::warn!("{} has a header but no data rows", path.display());
    }
    Ok(rows)
}

/// Keeps rows with `depth >= min_depth` and `strand_bias <= max_strand_bias`.
pub fn filter_observations(
    obs: &[SiteObservation],
    min_depth: u64,
    max_strand_bias: f64,
) -> Vec<SiteObservation> {
    obs.iter()
        .filter(|o| o.depth >= min_depth && o.strand_bias <= max_strand_bias)
        .cloned()
        .collect()
}
