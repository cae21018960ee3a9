use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExpressionDataset;
use crate::error::{Error, Result};
use crate::models::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    SamplesAsRows,
    GenesAsRows,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples_as_rows" | "samples" => Ok(Orientation::SamplesAsRows),
            "genes_as_rows" | "genes" => Ok(Orientation::GenesAsRows),
            _ => Err(Error::invalid(format!(
                "unknown orientation {s:?} (expected samples_as_rows or genes_as_rows)"
            ))),
        }
    }
}

fn delimiter(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Reads a delimited matrix with a header row and row names in the first
/// column. `.csv` files are comma separated, anything else tab separated.
/// Rows and columns in errors are 1-based and count the header row.
pub fn load_expression(path: &Path, orientation: Orientation, log2: bool, domain: Domain) -> Result<ExpressionDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter(path))
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(1, 0, e.to_string()))?,
        None => return Err(parse_err(1, 0, format!("{} is empty", path.display()))),
    };
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if columns.is_empty() {
        return Err(parse_err(1, 2, "header has no data columns"));
    }
    let mut seen = HashSet::new();
    if let Some(pos) = columns.iter().position(|c| !seen.insert(c.as_str())) {
        return Err(parse_err(
            1,
            pos + 2,
            format!("duplicate column name {:?}", columns[pos]),
        ));
    }
    let mut row_names = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_err(row, 0, e.to_string()))?;
        if rec.len() != columns.len() + 1 {
            return Err(parse_err(
                row,
                rec.len().min(columns.len() + 1),
                format!("expected {} fields, found {}", columns.len() + 1, rec.len()),
            ));
        }
        let name = rec[0].to_string();
        if !seen.insert(name.clone()) {
            return Err(parse_err(row, 1, format!("duplicate row name {name:?}")));
        }
        for (j, cell) in rec.iter().enumerate().skip(1) {
            let v: f32 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(row, j + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(row, j + 1, format!("non-finite value {cell:?}")));
            }
            let v = if log2 {
                if v <= -1.0 {
                    return Err(parse_err(row, j + 1, format!("log2(x+1) undefined for {v}")));
                }
                (f64::from(v) + 1.0).log2() as f32
            } else {
                v
            };
            values.push(v);
        }
        row_names.push(name);
    }
    if row_names.is_empty() {
        return Err(parse_err(
            2,
            0,
            format!("{} has a header but no data rows", path.display()),
        ));
    }
    let (samples, features, matrix) = match orientation {
        Orientation::SamplesAsRows => (row_names, columns, values),
        Orientation::GenesAsRows => {
            let (r, c) = (row_names.len(), columns.len());
            let mut t = vec![0.0; values.len()];
            for i in 0..r {
                for j in 0..c {
                    t[j * r + i] = values[i * c + j];
                }
            }
            (columns, row_names, t)
        }
    };
    ExpressionDataset::new(samples, features, matrix, domain)
}

/// Writes samples as rows with a `sample_id` corner header. Values use the
/// shortest representation that reads back to the same `f32`.
pub fn save_expression(ds: &ExpressionDataset, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter(path))
        .from_path(path)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut header = vec!["sample_id".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.n_samples() {
        let mut rec = vec![ds.sample_ids[i].clone()];
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of the label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sample_id: String,
    pub drug: String,
    pub auc: f64,
    #[serde(default)]
    pub stratum: Option<String>,
}

/// Reads a label CSV with columns `sample_id, drug, auc` and an optional
/// `stratum`.
pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<LabelRecord>().enumerate() {
        let rec = rec.map_err(|e| parse_err(i + 2, 0, e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.auc) {
            return Err(parse_err(i + 2, 3, format!("AUC {} outside [0, 1]", rec.auc)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_labels(records: &[LabelRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(r)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
