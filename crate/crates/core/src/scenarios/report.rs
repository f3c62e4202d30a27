//! Report serialization. JSON output has sorted keys and every float printed
//! with 17 significant digits, so equal reports give equal bytes.

use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

use super::{CatalogEntry, Comparison, VerificationReport};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "text" => Ok(Self::Text),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

struct FixedFloat;

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// The JSON tree of any serializable value; maps are key-sorted and
/// non-finite floats become null.
pub fn to_json_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(io)
}

pub fn write_json(v: &Value, out: &mut dyn Write) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut *out, FixedFloat);
    v.serialize(&mut ser).map_err(io)?;
    out.write_all(b"\n").map_err(io)
}

fn report_value(r: &VerificationReport) -> Result<Value> {
    to_json_value(r)
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn comparison_symbol(c: Comparison) -> &'static str {
    match c {
        Comparison::AtMost => "<=",
        Comparison::AtLeast => ">=",
    }
}

fn write_csv(reports: &[VerificationReport], out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "id", "anchor", "residual", "comparison", "tolerance", "pass", "expected_fail"]).map_err(io)?;
    for r in reports {
        for c in &r.checks {
            w.write_record([
                r.scenario.as_str(),
                c.id.as_str(),
                c.anchor.as_str(),
                &fmt_float(c.residual),
                comparison_symbol(c.comparison),
                &fmt_float(c.tolerance),
                if c.pass { "true" } else { "false" },
                if c.expected_fail { "true" } else { "false" },
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn write_text(reports: &[VerificationReport], out: &mut dyn Write) -> Result<()> {
    for r in reports {
        let verdict = if r.all_passed() { "ok" } else { "FAILED" };
        writeln!(out, "scenario {} [{verdict}] seed={} samples={}", r.scenario, r.environment.seed, r.environment.samples).map_err(io)?;
        for c in &r.checks {
            let tag = match (c.expected_fail, c.pass) {
                (false, true) => "PASS",
                (false, false) => "FAIL",
                (true, true) => "EXPECTED-FAIL",
                (true, false) => "FAIL (expected failure did not occur)",
            };
            writeln!(out, "  {tag:<14} {:<32} {:>24} {} {:<10.3e} {}", c.id, fmt_float(c.residual), comparison_symbol(c.comparison), c.tolerance, c.anchor)
                .map_err(io)?;
        }
        if let Some(ms) = r.wall_time_ms {
            writeln!(out, "  wall time {ms:.1} ms").map_err(io)?;
        }
    }
    Ok(())
}

/// One report, or several (a JSON array, one CSV table, consecutive text blocks).
pub fn emit_report(reports: &[VerificationReport], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            let v = if reports.len() == 1 { report_value(&reports[0])? } else { Value::Array(reports.iter().map(report_value).collect::<Result<_>>()?) };
            write_json(&v, out)
        }
        Format::Csv => write_csv(reports, out),
        Format::Text => write_text(reports, out),
    }
}

pub fn catalog_json(entries: &[CatalogEntry], out: &mut dyn Write) -> Result<()> {
    write_json(&to_json_value(&entries)?, out)
}
