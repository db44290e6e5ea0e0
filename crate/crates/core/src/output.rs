//! CSV and JSON writers. Floats are written with 17 significant digits so
//! they parse back to the same `f64`.

use std::io::{self, Write};

use serde::Serialize;

use crate::approx::ApproxRnPmf;
use crate::bins::BinSpec;
use crate::error::Result;
use crate::fit::OverlayRow;
use crate::simulate::EnsembleResult;

/// Round-trip formatting for a single float.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// JSON formatter writing floats like [`fmt_f64`]; non-finite values become `null`.
#[derive(Debug, Default, Clone, Copy)]
pub struct RoundTripFormatter;

impl serde_json::ser::Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, RoundTripFormatter);
    value.serialize(&mut ser)?;
    let mut writer = ser.into_inner();
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Columns `bin_lo,bin_hi,count,log_density`; `log_density` is empty for
/// empty bins and is relative to all replications, including out-of-range ones.
pub fn write_histogram_csv<W: Write>(writer: W, result: &EnsembleResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "count", "log_density"])?;
    let width = result.bins.width();
    let total = result.replications as f64;
    for (i, &count) in result.histogram.counts.iter().enumerate() {
        let (lo, hi) = result.bins.edges(i);
        let ld = (count > 0).then(|| (count as f64 / (total * width)).ln());
        w.write_record([fmt_f64(lo), fmt_f64(hi), count.to_string(), fmt_opt(ld)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x,location,mass`: the atom index, `x / k`-based location in
/// `[0, 1]` and its probability.
pub fn write_atoms_csv<W: Write>(writer: W, pmf: &ApproxRnPmf) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "location", "mass"])?;
    for (x, atom) in pmf.atoms.iter().enumerate() {
        w.write_record([x.to_string(), fmt_f64(atom.location), fmt_f64(atom.mass)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `bin_lo,bin_hi,bin_center,log_density` for bins carrying mass.
pub fn write_density_csv<W: Write>(
    writer: W,
    bins: &BinSpec,
    density: &[(f64, f64)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "bin_center", "log_density"])?;
    let half = bins.width() / 2.0;
    for &(center, ld) in density {
        w.write_record([
            fmt_f64(center - half),
            fmt_f64(center + half),
            fmt_f64(center),
            fmt_f64(ld),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_overlay_csv<W: Write>(writer: W, rows: &[OverlayRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "bin_lo",
        "bin_hi",
        "count",
        "empirical_log_density",
        "model_log_density",
    ])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.bin_lo),
            fmt_f64(r.bin_hi),
            r.count.to_string(),
            fmt_opt(r.empirical_log_density),
            fmt_opt(r.model_log_density),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn float_text_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn json_round_trips(xs in proptest::collection::vec(-1e300f64..1e300, 0..20)) {
            let text = to_json_string(&xs).unwrap();
            let back: Vec<f64> = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, xs);
        }
    }

    #[test]
    fn json_non_finite_is_null() {
        let text = to_json_string(&[1.0, f64::INFINITY, f64::NAN]).unwrap();
        assert_eq!(text.trim(), "[1.0000000000000000e0,null,null]");
    }
}
