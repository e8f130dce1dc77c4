//! Result records and their CSV/JSON serialisation.

use std::io::Write;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::config::ConfigError;

/// Header of every CSV result file.
pub const CSV_HEADER: &str = "experiment,params,observable,value,stderr,provenance,seconds";

/// One reported number. `stderr` is present for stochastic results only.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub params: String,
    pub observable: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub provenance: String,
    pub seconds: Option<f64>,
}

/// Seventeen significant digits; empty for absent or non-finite values.
pub fn format_number(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v > 0.0 => "inf".into(),
        Some(_) => "-inf".into(),
        None => String::new(),
    }
}

fn json_number(x: Option<f64>) -> Box<RawValue> {
    let text = match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => "null".into(),
    };
    RawValue::from_string(text).expect("formatted numbers are valid JSON")
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    experiment: &'a str,
    params: &'a str,
    observable: &'a str,
    value: Box<RawValue>,
    stderr: Box<RawValue>,
    provenance: &'a str,
    seconds: Box<RawValue>,
}

pub fn to_csv(records: &[ResultRecord]) -> Result<String, ConfigError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| ConfigError(format!("csv: {e}"));
    w.write_record(CSV_HEADER.split(',')).map_err(fail)?;
    for r in records {
        w.write_record([
            r.experiment.as_str(),
            &r.params,
            &r.observable,
            &format_number(Some(r.value)),
            &format_number(r.stderr),
            &r.provenance,
            &format_number(r.seconds),
        ])
        .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| ConfigError(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn to_json(records: &[ResultRecord]) -> String {
    let rows: Vec<JsonRecord> = records
        .iter()
        .map(|r| JsonRecord {
            experiment: &r.experiment,
            params: &r.params,
            observable: &r.observable,
            value: json_number(Some(r.value)),
            stderr: json_number(r.stderr),
            provenance: &r.provenance,
            seconds: json_number(r.seconds),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("records serialise");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout for `-`.
pub fn write_output(text: &str, path: &str) -> Result<(), ConfigError> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| ConfigError(format!("stdout: {e}")))
    } else {
        std::fs::write(path, text).map_err(|e| ConfigError(format!("cannot write {path}: {e}")))
    }
}

/// Serialises `records` in `format` and writes them to `path`.
pub fn emit_results(records: &[ResultRecord], format: &str, path: &str) -> Result<(), ConfigError> {
    if records.is_empty() {
        return Err(ConfigError("no results to emit".into()));
    }
    let text = match format {
        "json" => to_json(records),
        _ => to_csv(records)?,
    };
    write_output(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(stderr: Option<f64>) -> ResultRecord {
        ResultRecord {
            experiment: "mc".into(),
            params: "beta=0.5;L=8".into(),
            observable: "energy".into(),
            value: -1.0 / 3.0,
            stderr,
            provenance: "mc:sw".into(),
            seconds: None,
        }
    }

    #[test]
    fn csv_has_the_fixed_header_and_seventeen_digits() {
        let text = to_csv(&[record(Some(0.01)), record(None)]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("mc,beta=0.5;L=8,energy,-3.3333333333333331e-1,1.0000000000000000e-2,mc:sw,")
        );
        assert_eq!(lines.next(), Some("mc,beta=0.5;L=8,energy,-3.3333333333333331e-1,,mc:sw,"));
    }

    #[test]
    fn json_round_trips_through_a_generic_parser() {
        let text = to_json(&[record(Some(0.01)), record(None)]);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["value"].as_f64().unwrap(), -1.0 / 3.0);
        assert!(rows[1]["stderr"].is_null());
    }

    #[test]
    fn empty_record_lists_are_rejected() {
        assert!(emit_results(&[], "csv", "-").is_err());
    }
}
