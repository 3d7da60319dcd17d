use std::io::{Read, Write};

use super::PreprocessError;
use crate::features::FEATURE_COUNT;

pub const LABEL_BENIGN: i8 = 0;
pub const LABEL_MALICIOUS: i8 = 1;
pub const LABEL_UNLABELED: i8 = -1;

/// One line of the feature-matrix file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub label: i8,
    pub values: Vec<f64>,
}

/// `path,label,f00,...,f47`
pub fn csv_header() -> Vec<String> {
    ["path".to_string(), "label".to_string()]
        .into_iter()
        .chain((0..FEATURE_COUNT).map(|i| format!("f{i:02}")))
        .collect()
}

/// Decimal rendering with at most 9 significant digits. Counts print as
/// plain integers; very large or small magnitudes use exponent notation.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("valid float literal");
    let mag = rounded.abs();
    if (1e-5..1e16).contains(&mag) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<(), PreprocessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for row in rows {
        if row.values.len() != FEATURE_COUNT {
            return Err(PreprocessError::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: row.values.len(),
            });
        }
        let mut record = Vec::with_capacity(FEATURE_COUNT + 2);
        record.push(row.path.clone());
        record.push(row.label.to_string());
        record.extend(row.values.iter().map(|&v| format_value(v)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<FeatureRow>, PreprocessError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(PreprocessError::BadHeader(header.join(",")));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let bad = |detail: String| PreprocessError::BadRow { row, detail };
        let label: i8 = record[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad label {:?}", &record[1])))?;
        if ![LABEL_BENIGN, LABEL_MALICIOUS, LABEL_UNLABELED].contains(&label) {
            return Err(bad(format!("label {label} not in {{0, 1, -1}}")));
        }
        let values = record
            .iter()
            .skip(2)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("bad value {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(FeatureRow {
            path: record[0].to_string(),
            label,
            values,
        });
    }
    Ok(rows)
}
