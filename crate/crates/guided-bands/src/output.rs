//! Deterministic report rendering: every floating-point value is emitted
//! with 9 significant digits, so identical config and input produce
//! byte-identical reports.

use std::path::PathBuf;

use guided_spectra::Result;
use serde_json::{Number, Value};

/// 9-significant-digit token, also a valid JSON number. The exponent sign
/// is always explicit, matching the canonical form serde_json re-emits, so
/// CSV cells and JSON numbers carry the same bytes.
pub fn fmt9(x: f64) -> String {
    let s = format!("{x:.8e}");
    match s.find('e') {
        Some(i) if !matches!(s.as_bytes().get(i + 1), Some(b'+') | Some(b'-')) => {
            format!("{}e+{}", &s[..i], &s[i + 1..])
        }
        _ => s,
    }
}

/// A float as a JSON number carrying exactly the 9-digit token.
pub fn num(x: f64) -> Number {
    serde_json::from_str(&fmt9(x)).expect("9-digit float token is a JSON number")
}

/// Interval as a two-element array.
pub fn interval(lo: f64, hi: f64) -> [Number; 2] {
    [num(lo), num(hi)]
}

/// Margins may be infinite (a structurally failed certificate); JSON has no
/// infinity, so those become strings.
pub fn margin_value(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(num(x))
    } else {
        Value::String(format!("{x}"))
    }
}

/// Quote a CSV cell when it contains a separator, quote, or newline.
pub fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write the report to the requested sink; stdout when no path is given.
pub fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}
