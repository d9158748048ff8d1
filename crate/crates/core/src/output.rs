//! Byte-stable artifact writers.
//!
//! Floats are written with 6 significant digits and columns in a fixed order,
//! so identical inputs always produce identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// `v` with 6 significant digits, trailing zeros dropped. NaN prints as `NA`.
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "NA".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

/// `v` rounded to 6 significant digits, for JSON output.
pub fn round6(v: f64) -> f64 {
    if v.is_finite() {
        sig6(v).parse().expect("sig6 output parses")
    } else {
        v
    }
}

/// JSON number rounded to 6 significant digits; non-finite values become null.
pub fn json6(v: f64) -> Value {
    if v.is_finite() {
        json!(round6(v))
    } else {
        Value::Null
    }
}

pub fn opt6(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "NA".to_string())
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes a header line followed by `rows`.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| Error::Input(format!("{}: {e}", path.display()));
    writer.write_record(header).map_err(to_err)?;
    for row in rows {
        writer.write_record(&row).map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One GeoJSON feature with a LineString geometry.
pub fn line_feature(coords: &[[f64; 2]], properties: Map<String, Value>) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": Value::Object(properties),
    })
}

pub fn write_feature_collection(path: &Path, features: Vec<Value>) -> Result<()> {
    let collection = json!({ "type": "FeatureCollection", "features": features });
    write_json(path, &collection)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
