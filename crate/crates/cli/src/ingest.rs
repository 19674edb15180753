//! CSV ingestion. Rows are numbered from 1, excluding the header.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use amh_logit::{Dataset, Design, Observation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spec::ModelSpec;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed CSV near line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("no data rows")]
    NoRows,

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("row {row}: missing value in column '{column}'")]
    Missing { row: usize, column: String },

    #[error("row {row}: column '{column}' is not a finite number: '{value}'")]
    NotNumeric { row: usize, column: String, value: String },

    #[error("row {row}: x must be 0 or 1, got '{value}'")]
    XOutOfRange { row: usize, value: String },

    #[error("row {row}: y must be an integer in 1..={k}, got '{value}'")]
    YOutOfRange { row: usize, value: String, k: usize },

    #[error("row {row}: weight must be finite and nonnegative, got '{value}'")]
    BadWeight { row: usize, value: String },

    #[error("row {row}: level '{value}' of '{column}' was not seen when the model was fitted")]
    UnknownLevel { row: usize, column: String, value: String },

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error(transparent)]
    Model(#[from] amh_logit::Error),
}

/// Levels of a categorical association covariate, in coding order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub column: String,
    pub levels: Vec<String>,
}

impl FactorLevels {
    /// Indicator names. The first factor keeps every level (no intercept);
    /// later ones drop their first level.
    fn names(&self, first: bool) -> Vec<String> {
        let skip = usize::from(!first);
        self.levels[skip..].iter().map(|l| format!("{}={}", self.column, l)).collect()
    }

    fn code(&self, first: bool, i: usize) -> Vec<f64> {
        let skip = usize::from(!first);
        (skip..self.levels.len()).map(|j| f64::from(u8::from(i == j))).collect()
    }
}

/// `column=level` pairs joined by commas, or `all` without factors.
pub fn group_label(factors: &[FactorLevels], levels: &[usize]) -> String {
    if factors.is_empty() {
        return "all".into();
    }
    factors
        .iter()
        .zip(levels)
        .map(|(f, &i)| format!("{}={}", f.column, f.levels[i]))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub factors: Vec<FactorLevels>,
    /// Level index of each row under every association factor.
    pub groups: Vec<Vec<usize>>,
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Sort numerically when every level parses as a number.
fn sort_levels(levels: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = levels.into_iter().collect();
    if v.iter().all(|l| l.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    v
}

pub fn ingest_csv(path: &Path, spec: &ModelSpec, known: Option<&[FactorLevels]>) -> Result<Ingested, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_reader(file, spec, known)
}

/// Read a CSV stream. `known` fixes the factor levels (e.g. from an earlier
/// fit); otherwise they are collected from the data.
pub fn ingest_reader<R: Read>(mut input: R, spec: &ModelSpec, known: Option<&[FactorLevels]>) -> Result<Ingested, IngestError> {
    spec.validate()?;
    let mut bytes = vec![];
    input.read_to_end(&mut bytes).map_err(|e| IngestError::Io {
        path: "input".into(),
        message: e.to_string(),
    })?;
    let digest = sha256_hex(&bytes);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
    let malformed = |e: csv::Error| IngestError::Malformed {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(malformed)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::UnknownColumn(name.to_string()))
    };
    let cols = |names: &[String]| names.iter().map(|n| col(n)).collect::<Result<Vec<_>, _>>();
    let x_col = col(&spec.x_column)?;
    let y_col = col(&spec.y_column)?;
    let z1_cols = cols(&spec.z1_columns)?;
    let z2_cols = cols(&spec.z2_columns)?;
    let om_cols = cols(&spec.z_omega_columns)?;
    let w_col = spec.weight_column.as_deref().map(col).transpose()?;
    let s_col = spec.subject_column.as_deref().map(col).transpose()?;

    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(malformed)?;
    if records.is_empty() {
        return Err(IngestError::NoRows);
    }

    let field = |rec: &csv::StringRecord, row: usize, idx: usize| -> Result<String, IngestError> {
        match rec.get(idx) {
            Some(v) if !v.is_empty() => Ok(v.to_string()),
            _ => Err(IngestError::Missing {
                row,
                column: header[idx].to_string(),
            }),
        }
    };
    let number = |rec: &csv::StringRecord, row: usize, idx: usize| -> Result<f64, IngestError> {
        let v = field(rec, row, idx)?;
        v.parse::<f64>().ok().filter(|z| z.is_finite()).ok_or(IngestError::NotNumeric {
            row,
            column: header[idx].to_string(),
            value: v,
        })
    };

    let factors: Vec<FactorLevels> = match known {
        Some(f) => f.to_vec(),
        None => om_cols
            .iter()
            .zip(&spec.z_omega_columns)
            .map(|(&idx, name)| {
                let mut levels = BTreeSet::new();
                for (i, rec) in records.iter().enumerate() {
                    levels.insert(field(rec, i + 1, idx)?);
                }
                Ok(FactorLevels {
                    column: name.clone(),
                    levels: sort_levels(levels),
                })
            })
            .collect::<Result<_, IngestError>>()?,
    };
    if factors.len() != om_cols.len() || factors.iter().zip(&spec.z_omega_columns).any(|(f, c)| &f.column != c) {
        return Err(IngestError::Spec("factor levels do not match the association columns".into()));
    }
    let omega_names: Vec<String> = factors.iter().enumerate().flat_map(|(i, f)| f.names(i == 0)).collect();
    let design = Design::new(spec.z1_columns.clone(), spec.z2_columns.clone(), omega_names);
    let mut data = Dataset::new(spec.k_levels, design)?;
    let mut groups = Vec::with_capacity(records.len());

    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let xv = field(rec, row, x_col)?;
        let x = match xv.as_str() {
            "0" => 0u8,
            "1" => 1u8,
            _ => return Err(IngestError::XOutOfRange { row, value: xv }),
        };
        let yv = field(rec, row, y_col)?;
        let y = yv
            .parse::<usize>()
            .ok()
            .filter(|y| (1..=spec.k_levels).contains(y))
            .ok_or(IngestError::YOutOfRange {
                row,
                value: yv.clone(),
                k: spec.k_levels,
            })?;
        let weight = match w_col {
            Some(idx) => {
                let v = field(rec, row, idx)?;
                v.parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w >= 0.0)
                    .ok_or(IngestError::BadWeight { row, value: v })?
            }
            None => 1.0,
        };
        let z1 = z1_cols.iter().map(|&c| number(rec, row, c)).collect::<Result<Vec<_>, _>>()?;
        let z2 = z2_cols.iter().map(|&c| number(rec, row, c)).collect::<Result<Vec<_>, _>>()?;
        let mut z_omega = vec![];
        let mut levels = vec![];
        for (j, (&c, f)) in om_cols.iter().zip(&factors).enumerate() {
            let v = field(rec, row, c)?;
            let i = f.levels.iter().position(|l| *l == v).ok_or_else(|| IngestError::UnknownLevel {
                row,
                column: f.column.clone(),
                value: v.clone(),
            })?;
            z_omega.extend(f.code(j == 0, i));
            levels.push(i);
        }
        if om_cols.is_empty() {
            z_omega.push(1.0);
        }
        let subject = match s_col {
            Some(idx) => {
                let label = field(rec, row, idx)?;
                Some(data.subject_index(&label))
            }
            None => None,
        };
        data.push(Observation {
            x,
            y,
            z1,
            z2,
            z_omega,
            weight,
            subject,
        })?;
        groups.push(levels);
    }
    Ok(Ingested {
        dataset: data,
        factors,
        groups,
        digest,
    })
}
