//! CSV ingestion and export.
//!
//! Files are comma-separated UTF-8 with a required header row. Numerics use
//! `.` as the decimal separator and are never quoted. Ingestion validates
//! every value against the schema and rejects missing cells; errors name the
//! offending data row (1-based) and column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ColumnData, CovariateKind, Dataset, Schema};

/// Reads a dataset from a CSV file, validating it against `schema`.
pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path)?;
    ingest_csv_reader(file, schema)
}

/// Same as [`ingest_csv`] for any reader.
pub fn ingest_csv_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?} in CSV header")))
    };
    let y_pos = find(&schema.outcome)?;
    let t_pos = find(&schema.treatment.name)?;
    let cov_pos: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut covariates: Vec<ColumnData> = schema
        .covariates
        .iter()
        .map(|c| match c.kind {
            CovariateKind::Numeric => ColumnData::Numeric(Vec::new()),
            CovariateKind::Categorical { .. } => ColumnData::Categorical(Vec::new()),
        })
        .collect();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |pos: usize, column: &str| -> Result<&str> {
            match record.get(pos) {
                Some(v) if !v.trim().is_empty() => Ok(v.trim()),
                _ => Err(Error::Ingestion {
                    row,
                    column: column.to_string(),
                    message: "missing value".into(),
                }),
            }
        };

        let y_raw = cell(y_pos, &schema.outcome)?;
        let y_val: f64 = y_raw.parse().map_err(|_| Error::Ingestion {
            row,
            column: schema.outcome.clone(),
            message: format!("unparseable value {y_raw:?}"),
        })?;
        if !y_val.is_finite() {
            return Err(Error::Ingestion {
                row,
                column: schema.outcome.clone(),
                message: format!("non-finite value {y_raw:?}"),
            });
        }
        y.push(y_val);

        let t_raw = cell(t_pos, &schema.treatment.name)?;
        let t_idx = schema
            .treatment
            .levels
            .iter()
            .position(|l| l == t_raw)
            .ok_or_else(|| Error::Ingestion {
                row,
                column: schema.treatment.name.clone(),
                message: "undeclared level".into(),
            })?;
        t.push(t_idx as u32);

        for ((decl, col), &pos) in schema.covariates.iter().zip(&mut covariates).zip(&cov_pos) {
            let raw = cell(pos, &decl.name)?;
            match (&decl.kind, col) {
                (CovariateKind::Numeric, ColumnData::Numeric(v)) => {
                    let parsed: f64 = raw.parse().map_err(|_| Error::Ingestion {
                        row,
                        column: decl.name.clone(),
                        message: format!("unparseable value {raw:?}"),
                    })?;
                    if !parsed.is_finite() {
                        return Err(Error::Ingestion {
                            row,
                            column: decl.name.clone(),
                            message: format!("non-finite value {raw:?}"),
                        });
                    }
                    v.push(parsed);
                }
                (CovariateKind::Categorical { levels, .. }, ColumnData::Categorical(v)) => {
                    let idx =
                        levels
                            .iter()
                            .position(|l| l == raw)
                            .ok_or_else(|| Error::Ingestion {
                                row,
                                column: decl.name.clone(),
                                message: "undeclared level".into(),
                            })?;
                    v.push(idx as u32);
                }
                _ => unreachable!(),
            }
        }
    }

    Dataset::from_columns(schema.clone(), y, t, covariates)
}

/// Writes a dataset back to CSV in schema column order. Numerics are
/// formatted with the shortest representation that round-trips, so
/// re-ingesting the file reproduces the dataset exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_csv_writer(ds, file)
}

/// Same as [`write_csv`] for any writer.
pub fn write_csv_writer<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let schema = ds.schema();
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec![schema.outcome.clone(), schema.treatment.name.clone()];
    header.extend(schema.covariates.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;

    for row in 0..ds.n() {
        let mut fields: Vec<String> = Vec::with_capacity(header.len());
        fields.push(format!("{}", ds.y()[row]));
        fields.push(ds.t_label(row).to_string());
        for decl in &schema.covariates {
            let value = ds.record(row).get(&decl.name).expect("declared column");
            fields.push(match value {
                super::Value::Numeric(v) => format!("{v}"),
                super::Value::Categorical { label, .. } => label.to_string(),
            });
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}
