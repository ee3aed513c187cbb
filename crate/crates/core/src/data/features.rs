//! Feature manifests: per-column statistics fitted on a training split and the
//! two encodings built from them.
//!
//! *Original* maps each continuous or binary column to one value in `[0, 1]`
//! and each categorical column to a one-hot block. *Resampled* replaces every
//! continuous value `x` by `m` Gaussian receptive fields
//! `exp(-(x - μ_k)² / 2σ²)` with centres `μ_k = k / (m - 1)` and
//! `σ = 1 / (γ (m - 1))`; binary and one-hot values pass through.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ColumnKind, ColumnValues, Dataset, RawRecords};
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Default receptive-field width factor γ.
pub const DEFAULT_GAMMA: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Encoding {
    Original,
    Resampled { m: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ColumnSpec {
    Continuous { name: String, min: f64, max: f64, median: f64 },
    Binary { name: String, median: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
}

impl ColumnSpec {
    pub fn name(&self) -> &str {
        match self {
            ColumnSpec::Continuous { name, .. } | ColumnSpec::Binary { name, .. } | ColumnSpec::Categorical { name, .. } => name,
        }
    }

    fn kind(&self) -> ColumnKind {
        match self {
            ColumnSpec::Continuous { .. } => ColumnKind::Continuous,
            ColumnSpec::Binary { .. } => ColumnKind::Binary,
            ColumnSpec::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    fn width(&self, encoding: Encoding) -> usize {
        match (self, encoding) {
            (ColumnSpec::Continuous { .. }, Encoding::Resampled { m }) => m,
            (ColumnSpec::Categorical { vocabulary, .. }, _) => vocabulary.len(),
            _ => 1,
        }
    }
}

/// Everything needed to encode unseen records exactly like the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub schema_version: u32,
    pub dataset: String,
    pub encoding: Encoding,
    pub gamma: f64,
    pub columns: Vec<ColumnSpec>,
    pub class_names: Vec<String>,
    pub width: usize,
}

/// Options for [`FeatureSpec::fit`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub dataset: String,
    pub encoding: Encoding,
    pub gamma: f64,
    /// Fixed vocabularies by column name. Training values outside a fixed
    /// vocabulary are an error.
    pub vocabularies: HashMap<String, Vec<String>>,
    /// Required output width, if any.
    pub expected_width: Option<usize>,
}

impl FitOptions {
    pub fn new(dataset: &str, encoding: Encoding) -> Self {
        FitOptions {
            dataset: dataset.to_string(),
            encoding,
            gamma: DEFAULT_GAMMA,
            vocabularies: HashMap::new(),
            expected_width: None,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl FeatureSpec {
    /// Fits column statistics on `train`. Only training records are read.
    pub fn fit(train: &RawRecords, opts: &FitOptions) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        train.check()?;
        if let Encoding::Resampled { m } = opts.encoding {
            if m < 2 {
                return Err(Error::InvalidParameter(format!("receptive field count m must be >= 2, got {m}")));
            }
        }
        if !(opts.gamma.is_finite() && opts.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", opts.gamma)));
        }
        let mut columns = Vec::with_capacity(train.columns.len());
        for col in &train.columns {
            let spec = match (&col.kind, &col.values) {
                (ColumnKind::Continuous, ColumnValues::Numeric(v)) => {
                    let med = median(v);
                    let (min, max) = v
                        .iter()
                        .filter(|x| x.is_finite())
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                    let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
                    ColumnSpec::Continuous {
                        name: col.name.clone(),
                        min,
                        max,
                        median: med,
                    }
                }
                (ColumnKind::Binary, ColumnValues::Numeric(v)) => ColumnSpec::Binary {
                    name: col.name.clone(),
                    median: median(v),
                },
                (ColumnKind::Categorical, ColumnValues::Text(v)) => {
                    let seen: BTreeSet<&str> = v.iter().map(String::as_str).collect();
                    let vocabulary = match opts.vocabularies.get(&col.name) {
                        Some(fixed) => {
                            if let Some(extra) = seen.iter().find(|s| !fixed.iter().any(|f| f == *s)) {
                                return Err(Error::Manifest(format!(
                                    "column {}: training value {extra:?} is outside the fixed vocabulary",
                                    col.name
                                )));
                            }
                            fixed.clone()
                        }
                        None => seen.into_iter().map(str::to_string).collect(),
                    };
                    ColumnSpec::Categorical {
                        name: col.name.clone(),
                        vocabulary,
                    }
                }
                _ => {
                    return Err(Error::Manifest(format!(
                        "column {}: values do not match kind {:?}",
                        col.name, col.kind
                    )))
                }
            };
            columns.push(spec);
        }
        let width = columns.iter().map(|c| c.width(opts.encoding)).sum();
        if let Some(expected) = opts.expected_width {
            if width != expected {
                return Err(Error::WidthMismatch { expected, actual: width });
            }
        }
        Ok(FeatureSpec {
            schema_version: MANIFEST_SCHEMA_VERSION,
            dataset: opts.dataset.clone(),
            encoding: opts.encoding,
            gamma: opts.gamma,
            columns,
            class_names: train.class_names.clone(),
            width,
        })
    }

    /// SHA-256 of the manifest's JSON serialisation.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("manifest serialises");
        Sha256::digest(bytes).into()
    }

    pub fn digest_hex(&self) -> String {
        self.digest().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Applies the fitted transform. Never mutates the manifest.
    pub fn encode(&self, records: &RawRecords) -> Result<Dataset> {
        records.check()?;
        if records.class_names != self.class_names {
            return Err(Error::Manifest(format!(
                "class names {:?} do not match the manifest's {:?}",
                records.class_names, self.class_names
            )));
        }
        let cols = self
            .columns
            .iter()
            .map(|spec| {
                let col = records
                    .column(spec.name())
                    .ok_or_else(|| Error::Manifest(format!("column {} is missing from the records", spec.name())))?;
                if col.kind != spec.kind() {
                    return Err(Error::Manifest(format!(
                        "column {} is {:?} in the records but {:?} in the manifest",
                        spec.name(),
                        col.kind,
                        spec.kind()
                    )));
                }
                Ok(col)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = records.len();
        let mut x = Array2::<f64>::zeros((n, self.width));
        let mut offset = 0;
        for (spec, col) in self.columns.iter().zip(cols) {
            let w = spec.width(self.encoding);
            match (spec, &col.values) {
                (ColumnSpec::Continuous { min, max, median, .. }, ColumnValues::Numeric(v)) => {
                    for (r, &raw) in v.iter().enumerate() {
                        let s = scale(if raw.is_finite() { raw } else { *median }, *min, *max);
                        match self.encoding {
                            Encoding::Original => x[(r, offset)] = s,
                            Encoding::Resampled { m } => {
                                for (k, g) in receptive_fields(s, m, self.gamma).into_iter().enumerate() {
                                    x[(r, offset + k)] = g;
                                }
                            }
                        }
                    }
                }
                (ColumnSpec::Binary { median, .. }, ColumnValues::Numeric(v)) => {
                    for (r, &raw) in v.iter().enumerate() {
                        let b = if raw.is_finite() { raw } else { *median };
                        x[(r, offset)] = if b > 0.0 { 1.0 } else { 0.0 };
                    }
                }
                (ColumnSpec::Categorical { vocabulary, .. }, ColumnValues::Text(v)) => {
                    let index: HashMap<&str, usize> =
                        vocabulary.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
                    for (r, value) in v.iter().enumerate() {
                        if let Some(&k) = index.get(value.as_str()) {
                            x[(r, offset + k)] = 1.0;
                        }
                    }
                }
                _ => unreachable!("kinds checked above"),
            }
            offset += w;
        }
        Ok(Dataset {
            features: x,
            labels: records.labels.clone(),
            manifest: self.clone(),
        })
    }
}

fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// `m` Gaussian responses to `x ∈ [0, 1]` with evenly spaced centres.
pub fn receptive_fields(x: f64, m: usize, gamma: f64) -> Vec<f64> {
    let sigma = 1.0 / (gamma * (m - 1) as f64);
    (0..m)
        .map(|k| {
            let mu = k as f64 / (m - 1) as f64;
            (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}
