//! Datasets and everything that produces them.
//!
//! The central type is [`LabeledDataset`]: a dense row-major feature matrix
//! with one numeric target per row and a provenance record. Classification
//! targets are stored as `f64` holding integral class values, so regression
//! and classification share one container.

pub mod csv;
pub mod idx;
pub mod rng;
pub mod synthetic;

use serde::{Deserialize, Serialize};

pub use csv::{load_csv, CsvSchema};
pub use idx::{load_idx, save_idx};
pub use synthetic::{
    exact_expected_error, sample_finite_domain, synth_clusters, synth_linear, ClusteredSpec,
    FiniteDomainSpec, SyntheticLinearSpec,
};

/// Errors raised while constructing or loading datasets.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("row {row} has {found} features, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("parse failure at line {line}, column `{column}`: {message}")]
    Parse { line: u64, column: String, message: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("bad magic number in `{path}`: expected {expected:#010x}, found {found:#010x}")]
    MagicMismatch { path: String, expected: u32, found: u32 },
    #[error("`{images}` holds {image_count} images but `{labels}` holds {label_count} labels")]
    CountMismatch { images: String, labels: String, image_count: usize, label_count: usize },
    #[error("file `{path}` ends before its declared contents ({expected} bytes expected, {found} present)")]
    Truncated { path: String, expected: usize, found: usize },
    #[error("file `{path}` has {found} trailing bytes after its declared contents")]
    TrailingBytes { path: String, found: usize },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("split part {index} would be empty ({n} rows over {parts} parts)")]
    EmptyPart { index: usize, n: usize, parts: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a dataset came from and any ground truth it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Human-readable origin, e.g. a path or a generator description.
    pub source: String,
    /// Indices of the truly relevant features, when the generator knows them.
    /// Required by the feature-recall loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_features: Option<Vec<usize>>,
    /// Original (rows, cols) of image data, kept so a round trip through the
    /// IDX writer reproduces the input byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<(usize, usize)>,
    /// Set when rows were drawn with replacement from a smaller pool.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub with_replacement: bool,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Provenance {
            source: source.into(),
            truth_features: None,
            image_shape: None,
            with_replacement: false,
        }
    }
}

/// A dense labeled dataset: `n` rows by `d` features plus one target each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<f64>, // row-major, n * d
    targets: Vec<f64>,
    n: usize,
    d: usize,
    feature_names: Option<Vec<String>>,
    provenance: Provenance,
}

impl LabeledDataset {
    /// Builds a dataset from per-row feature vectors.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let d = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::RaggedRows { row: i, expected: d, found: row.len() });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(features, rows.len(), d, targets, provenance)
    }

    /// Builds a dataset from an already-flat row-major feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        n: usize,
        d: usize,
        targets: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if n == 0 {
            return Err(DataError::EmptyDataset);
        }
        if features.len() != n * d {
            return Err(DataError::LengthMismatch {
                what: "feature buffer",
                expected: n * d,
                found: features.len(),
            });
        }
        if targets.len() != n {
            return Err(DataError::LengthMismatch {
                what: "target vector",
                expected: n,
                found: targets.len(),
            });
        }
        for (i, v) in features.iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: i / d.max(1), column: i % d.max(1) });
            }
        }
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(DataError::NonFinite { row: i, column: d });
        }
        Ok(LabeledDataset { features, targets, n, d, feature_names: None, provenance })
    }

    /// Attaches feature names; length must match the feature count.
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.d {
            return Err(DataError::LengthMismatch {
                what: "feature names",
                expected: self.d,
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    /// The distinct target values, ascending. For classification data these
    /// are the classes.
    pub fn distinct_labels(&self) -> Vec<f64> {
        let mut labels = self.targets.clone();
        labels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        labels.dedup();
        labels
    }

    /// New dataset containing the given rows, in the given order. Indices may
    /// repeat (sampling with replacement).
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        if indices.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            assert!(i < self.n, "subset index {i} out of range {}", self.n);
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Ok(LabeledDataset {
            features,
            targets,
            n: indices.len(),
            d: self.d,
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Concatenates datasets with identical dimensionality. Provenance and
    /// names are taken from the first part.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<Self, DataError> {
        let first = parts.first().ok_or(DataError::EmptyDataset)?;
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for part in parts {
            if part.d != first.d {
                return Err(DataError::LengthMismatch {
                    what: "feature dimensionality",
                    expected: first.d,
                    found: part.d,
                });
            }
            features.extend_from_slice(&part.features);
            targets.extend_from_slice(&part.targets);
        }
        let n = targets.len();
        Ok(LabeledDataset {
            features,
            targets,
            n,
            d: first.d,
            feature_names: first.feature_names.clone(),
            provenance: first.provenance.clone(),
        })
    }

    /// Replaces the targets, keeping everything else. Used to relabel
    /// training data with a complex model's predictions.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self, DataError> {
        if targets.len() != self.n {
            return Err(DataError::LengthMismatch {
                what: "target vector",
                expected: self.n,
                found: targets.len(),
            });
        }
        let mut out = self.clone();
        out.targets = targets;
        Ok(out)
    }
}

/// Splits a dataset into disjoint parts with the given fractions.
///
/// Rows are permuted by a seeded shuffle, then cut at boundaries obtained by
/// rounding the cumulative fractions, so the parts cover the dataset exactly.
/// Fractions must be positive and sum to 1 (within 1e-9), and every part must
/// receive at least one row.
pub fn split(
    data: &LabeledDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<LabeledDataset>, DataError> {
    if fractions.is_empty() {
        return Err(DataError::InvalidFractions("no fractions given".into()));
    }
    if fractions.iter().any(|&f| !f.is_finite() || f <= 0.0) {
        return Err(DataError::InvalidFractions(format!(
            "fractions must be positive, got {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidFractions(format!("fractions sum to {sum}, expected 1")));
    }
    let n = data.len();
    let mut rng = rng::stream_rng(seed, rng::streams::SPLIT);
    let perm = rng::permutation(&mut rng, n);
    let mut boundaries = Vec::with_capacity(fractions.len() + 1);
    boundaries.push(0usize);
    let mut acc = 0.0;
    for f in fractions {
        acc += f;
        boundaries.push(((acc * n as f64).round() as usize).min(n));
    }
    *boundaries.last_mut().unwrap() = n;
    let mut parts = Vec::with_capacity(fractions.len());
    for (idx, w) in boundaries.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(DataError::EmptyPart { index: idx, n, parts: fractions.len() });
        }
        parts.push(data.subset(&perm[w[0]..w[1]])?);
    }
    Ok(parts)
}

/// Equal-fraction split into `k` folds.
pub fn kfold(data: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<LabeledDataset>, DataError> {
    if k < 2 {
        return Err(DataError::InvalidFractions(format!("k-fold needs k >= 2, got {k}")));
    }
    split(data, &vec![1.0 / k as f64; k], seed)
}
