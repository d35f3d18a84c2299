//! CSV layouts for datasets, covariates and risk scores.
//!
//! Datasets use the header `time,status,<feature...>` with `status` in
//! `{0, 1}`. Floats are written in shortest round-trip form, so a written
//! dataset reads back bit-identically.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::survival::SurvivalDataset;

fn parse_field(value: &str, row: usize, column: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|e| Error::Parse {
        location: format!("row {row}, column `{column}`"),
        message: format!("`{value}`: {e}"),
    })
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(reader: impl Read) -> Result<Table> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (r, record) in csv.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .zip(&header)
            .map(|(v, h)| parse_field(v, r + 1, h))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn matrix_from_rows(rows: &[Vec<f64>], columns: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][columns[j]])
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

pub fn parse_dataset(reader: impl Read) -> Result<SurvivalDataset> {
    let table = read_table(reader)?;
    let missing = |name: &str| Error::Parse {
        location: "header".into(),
        message: format!("missing `{name}` column"),
    };
    let t = column(&table.header, "time").ok_or_else(|| missing("time"))?;
    let s = column(&table.header, "status").ok_or_else(|| missing("status"))?;
    let features: Vec<usize> = (0..table.header.len()).filter(|&c| c != t && c != s).collect();
    let times = table.rows.iter().map(|r| r[t]).collect();
    let status = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| match r[s] {
            v if v == 1.0 => Ok(true),
            v if v == 0.0 => Ok(false),
            v => Err(Error::Parse {
                location: format!("row {}, column `status`", i + 1),
                message: format!("status must be 0 or 1, found {v}"),
            }),
        })
        .collect::<Result<Vec<bool>>>()?;
    let names = features.iter().map(|&c| table.header[c].clone()).collect();
    SurvivalDataset::new(times, status, matrix_from_rows(&table.rows, &features))?.with_feature_names(names)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<SurvivalDataset> {
    parse_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset_to(data: &SurvivalDataset, writer: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_owned(), "status".to_owned()];
    header.extend(data.feature_names().iter().cloned());
    csv.write_record(&header)?;
    for i in 0..data.n() {
        let mut record = vec![data.times()[i].to_string(), (data.status()[i] as u8).to_string()];
        record.extend(data.row(i).iter().map(f64::to_string));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_dataset(data: &SurvivalDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset_to(data, std::fs::File::create(path)?)
}

/// Covariate columns of a CSV, skipping `time` and `status` when present.
pub fn read_covariates(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(std::fs::File::open(path)?)?;
    let features: Vec<usize> = (0..table.header.len())
        .filter(|&c| table.header[c] != "time" && table.header[c] != "status")
        .collect();
    let names = features.iter().map(|&c| table.header[c].clone()).collect();
    let x = matrix_from_rows(&table.rows, &features);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariates"));
    }
    Ok((names, x))
}

/// One `score` column.
pub fn write_scores(scores: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record(["score"])?;
    for s in scores {
        csv.write_record([s.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let table = read_table(std::fs::File::open(path)?)?;
    let c = column(&table.header, "score").ok_or_else(|| Error::Parse {
        location: "header".into(),
        message: "missing `score` column".into(),
    })?;
    Ok(table.rows.iter().map(|r| r[c]).collect())
}
