//! CSV ingestion and export.
//!
//! All schemas are UTF-8, comma separated, with one header row and the label
//! in the last column:
//!
//! * `cancer`: 30 numeric feature columns, then `diagnosis` in `{M, B}`
//!   (malignant = 1, benign = 0).
//! * `printer`: `tensile_strength, elastic_modulus, elongation_at_break,
//!   extrusion_temperature, layer_height, bed_temperature, print_speed,
//!   printer` with printer in `{makerbot, ultimaker, zortrax}` (labels 0, 1, 2;
//!   matched case-insensitively on the first word, so `MakerBot Replicator 2X`
//!   is accepted).
//! * `generic`: any number of numeric columns, then an integer label column;
//!   the class count is `max(label) + 1`.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use kanbench_core::data::{Dataset, PRINTER_CLASSES, PRINTER_FEATURES};
use kanbench_core::numerics::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const CANCER_FEATURES: usize = 30;
pub const CANCER_ROWS: usize = 569;
pub const PRINTER_ROWS: usize = 104;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    Cancer,
    Printer,
    Generic,
}

impl Schema {
    pub fn as_str(self) -> &'static str {
        match self {
            Schema::Cancer => "cancer",
            Schema::Printer => "printer",
            Schema::Generic => "generic",
        }
    }
}

impl FromStr for Schema {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cancer" => Ok(Schema::Cancer),
            "printer" => Ok(Schema::Printer),
            "generic" => Ok(Schema::Generic),
            other => Err(format!(
                "unknown schema `{other}` (expected cancer, printer or generic)"
            )),
        }
    }
}

/// A parsed file plus non-fatal findings (e.g. an unexpected row count).
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| BenchError::data(path, format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.len() < 2 {
        return Err(BenchError::data(
            path,
            "need at least one feature column and a label column",
        ));
    }
    let n_features = headers.len() - 1;
    let label_header = headers[n_features].as_str();
    match schema {
        Schema::Cancer => {
            if n_features != CANCER_FEATURES || label_header != "diagnosis" {
                return Err(BenchError::data(
                    path,
                    format!(
                        "cancer schema expects {CANCER_FEATURES} feature columns followed by `diagnosis`, \
                         found {n_features} followed by `{label_header}`"
                    ),
                ));
            }
        }
        Schema::Printer => {
            let expected: Vec<&str> = PRINTER_FEATURES.iter().copied().chain(["printer"]).collect();
            if headers != expected {
                return Err(BenchError::data(
                    path,
                    format!(
                        "printer schema expects header `{}`, found `{}`",
                        expected.join(","),
                        headers.join(",")
                    ),
                ));
            }
        }
        Schema::Generic => {}
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| BenchError::data(path, format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(BenchError::data(
                path,
                format!("line {line}: expected {} cells, found {}", headers.len(), record.len()),
            ));
        }
        for (col, cell) in record.iter().take(n_features).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                BenchError::data(
                    path,
                    format!(
                        "line {line}, column {} (`{}`): cannot parse `{cell}` as a number",
                        col + 1,
                        headers[col]
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(BenchError::data(
                    path,
                    format!("line {line}, column {} (`{}`): non-finite value", col + 1, headers[col]),
                ));
            }
            values.push(v);
        }
        let raw = &record[n_features];
        let label = parse_label(schema, raw).ok_or_else(|| {
            BenchError::data(
                path,
                format!(
                    "line {line}, column {} (`{label_header}`): unknown label `{raw}`",
                    n_features + 1
                ),
            )
        })?;
        labels.push(label);
    }
    let n = labels.len();
    if n == 0 {
        return Err(BenchError::data(path, "no data rows"));
    }
    let class_count = match schema {
        Schema::Cancer => 2,
        Schema::Printer => 3,
        Schema::Generic => labels.iter().max().copied().unwrap_or(0) + 1,
    };
    let mut warnings = Vec::new();
    let expected_rows = match schema {
        Schema::Cancer => Some(CANCER_ROWS),
        Schema::Printer => Some(PRINTER_ROWS),
        Schema::Generic => None,
    };
    if let Some(expected) = expected_rows {
        if n != expected {
            warnings.push(format!(
                "{}: {} schema usually has {expected} rows, found {n}",
                path.display(),
                schema.as_str()
            ));
        }
    }
    let features = Matrix::from_vec(n, n_features, values)?;
    let dataset = Dataset::new(features, labels, class_count)
        .and_then(|d| d.with_feature_names(headers[..n_features].to_vec()))
        .map_err(|e| BenchError::data(path, e.to_string()))?;
    Ok(LoadedCsv { dataset, warnings })
}

fn parse_label(schema: Schema, raw: &str) -> Option<usize> {
    match schema {
        Schema::Cancer => match raw {
            "M" | "m" => Some(1),
            "B" | "b" => Some(0),
            _ => None,
        },
        Schema::Printer => {
            let first = raw.split_whitespace().next()?.to_ascii_lowercase();
            PRINTER_CLASSES.iter().position(|c| *c == first)
        }
        Schema::Generic => raw.parse().ok(),
    }
}

/// Writes a dataset in the generic schema (`x1..xD` or its feature names, then `label`).
pub fn write_generic_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_writer(File::create(path).map_err(|e| BenchError::io(path, e))?);
    let mut header: Vec<String> = match data.feature_names() {
        Some(names) => names.to_vec(),
        None => (1..=data.dim()).map(|i| format!("x{i}")).collect(),
    };
    header.push("label".into());
    let wrap = |e: csv::Error| BenchError::data(path, e.to_string());
    writer.write_record(&header).map_err(wrap)?;
    for (row, &label) in data.features().row_iter().zip(data.labels()) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        writer.write_record(&record).map_err(wrap)?;
    }
    writer.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// Writes a dataset in the printer schema with class names as labels.
pub fn write_printer_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if data.dim() != PRINTER_FEATURES.len() || data.class_count() != PRINTER_CLASSES.len() {
        return Err(BenchError::Config(format!(
            "printer CSV needs {} features and {} classes",
            PRINTER_FEATURES.len(),
            PRINTER_CLASSES.len()
        )));
    }
    let mut file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = String::new();
    out.push_str(&PRINTER_FEATURES.join(","));
    out.push_str(",printer\n");
    for (row, &label) in data.features().row_iter().zip(data.labels()) {
        for v in row {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(PRINTER_CLASSES[label]);
        out.push('\n');
    }
    file.write_all(out.as_bytes()).map_err(|e| BenchError::io(path, e))
}
