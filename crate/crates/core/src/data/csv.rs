//! CSV loading with strict validation.
//!
//! Every cell must parse as a finite `f64`; failures report the 1-based line
//! number and offending column so bad rows can be found and fixed.

use std::path::Path;

use super::{DataError, LabeledDataset, Provenance};

/// Which columns to read from a headered CSV file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CsvSchema {
    /// Name of the target column.
    pub target: String,
    /// Feature columns, in the order they should appear in the dataset.
    /// `None` selects every non-target column in header order.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn new(target: impl Into<String>) -> Self {
        CsvSchema { target: target.into(), features: None }
    }
}

/// Loads a headered CSV file into a dataset.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(e, path))?;
    let headers = reader.headers().map_err(|e| csv_error(e, path))?.clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let target_idx = find(&schema.target)?;
    let (feature_idx, feature_names): (Vec<usize>, Vec<String>) = match &schema.features {
        Some(names) => {
            let mut idx = Vec::with_capacity(names.len());
            for name in names {
                idx.push(find(name)?);
            }
            (idx, names.clone())
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(i, h)| (i, h.to_string()))
            .unzip(),
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, path))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |col: usize, name: &str| -> Result<f64, DataError> {
            let raw = record.get(col).ok_or_else(|| DataError::Parse {
                line,
                column: name.to_string(),
                message: "missing field".into(),
            })?;
            let value: f64 = raw.trim().parse().map_err(|_| DataError::Parse {
                line,
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: name.to_string(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(value)
        };
        let mut row = Vec::with_capacity(feature_idx.len());
        for (k, &col) in feature_idx.iter().enumerate() {
            row.push(parse(col, &feature_names[k])?);
        }
        targets.push(parse(target_idx, &schema.target)?);
        rows.push(row);
    }

    LabeledDataset::from_rows(rows, targets, Provenance::new(path.display().to_string()))?
        .with_feature_names(feature_names)
}

/// Maps csv crate errors onto [`DataError`], preserving the line number for
/// structural problems such as rows with the wrong field count.
fn csv_error(err: ::csv::Error, path: &Path) -> DataError {
    match err.into_kind() {
        ::csv::ErrorKind::Io(e) => DataError::Io(e),
        ::csv::ErrorKind::UnequalLengths { pos, expected_len, len } => DataError::Parse {
            line: pos.as_ref().map(|p| p.line()).unwrap_or(0),
            column: "*".into(),
            message: format!("row has {len} fields, expected {expected_len}"),
        },
        other => DataError::Parse {
            line: 0,
            column: "*".into(),
            message: format!("{other:?} in `{}`", path.display()),
        },
    }
}
