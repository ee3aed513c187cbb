//! Record loading, feature encoding and the encoded dataset container.
//!
//! Container layout (little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `SNNDATA\0` |
//! | 8 | 4 | format version, `u32` |
//! | 12 | 4 | zero |
//! | 16 | 8 | rows `n`, `u64` |
//! | 24 | 8 | columns `d`, `u64` |
//! | 32 | 32 | SHA-256 of the manifest JSON |
//! | 64 | 8 n d | features, row-major `f64` |
//! | .. | 4 n | labels, `u32` |
//! | .. | 32 | SHA-256 of every preceding byte |
//!
//! The manifest itself is stored as JSON next to the container, at the
//! container path with `.manifest.json` appended.

pub mod awid;
mod features;
pub mod nslkdd;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use nslkdd::encode_original_kdd;
pub use features::{
    receptive_fields, ColumnSpec, Encoding, FeatureSpec, FitOptions, DEFAULT_GAMMA, MANIFEST_SCHEMA_VERSION,
};

pub const DATASET_MAGIC: &[u8; 8] = b"SNNDATA\0";
pub const DATASET_VERSION: u32 = 1;

/// Token stored for a missing categorical value.
pub const MISSING: &str = "?";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

/// Numeric cells use `NaN` for missing values.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub values: ColumnValues,
}

impl RawColumn {
    fn len(&self) -> usize {
        match &self.values {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Text(v) => v.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> RawColumn {
        let values = match &self.values {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnValues::Text(v) => ColumnValues::Text(idx.iter().map(|&i| v[i].clone()).collect()),
        };
        RawColumn {
            name: self.name.clone(),
            kind: self.kind,
            values,
        }
    }
}

/// Parsed records, column-major, before any encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecords {
    pub columns: Vec<RawColumn>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl RawRecords {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn select(&self, idx: &[usize]) -> RawRecords {
        RawRecords {
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Record count per class, in class order.
    pub fn class_totals(&self) -> Vec<usize> {
        class_totals(&self.labels, self.class_names.len())
    }

    pub(crate) fn check(&self) -> Result<()> {
        if let Some(c) = self.columns.iter().find(|c| c.len() != self.labels.len()) {
            return Err(Error::LengthMismatch {
                what: "column vs labels",
                left: c.len(),
                right: self.labels.len(),
            });
        }
        Ok(())
    }
}

fn class_totals(labels: &[usize], n: usize) -> Vec<usize> {
    let mut t = vec![0; n];
    for &l in labels {
        t[l] += 1;
    }
    t
}

/// Parses a decimal or `0x` hexadecimal token.
pub(crate) fn parse_number(s: &str) -> Option<f64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        return u64::from_str_radix(hex, 16).ok().map(|v| v as f64);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Seeded stratified split of indices: for each class, `ceil(frac · n_c)`
/// shuffled members go to the second part. Both parts keep ascending order.
pub fn stratified_split_indices(labels: &[usize], frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidParameter(format!("split fraction must lie in (0, 1), got {frac}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut keep, mut held) = (Vec::new(), Vec::new());
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        let k = (frac * members.len() as f64).ceil() as usize;
        held.extend_from_slice(&members[..k]);
        keep.extend_from_slice(&members[k..]);
    }
    keep.sort_unstable();
    held.sort_unstable();
    Ok((keep, held))
}

/// Seeded sample of `n` distinct indices out of `len`, in ascending order.
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, len, n.min(len)).into_vec();
    idx.sort_unstable();
    idx
}

/// Encoded features in `[0, 1]`, labels and the manifest that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub manifest: FeatureSpec,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_names(&self) -> &[String] {
        &self.manifest.class_names
    }

    pub fn class_totals(&self) -> Vec<usize> {
        class_totals(&self.labels, self.manifest.class_names.len())
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            manifest: self.manifest.clone(),
        }
    }

    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        self.select(&subsample_indices(self.len(), n, seed))
    }

    /// `(train, held_out)` with `frac` of every class held out.
    pub fn stratified_split(&self, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let (a, b) = stratified_split_indices(&self.labels, frac, seed)?;
        Ok((self.select(&a), self.select(&b)))
    }

    fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.labels.len() {
            return Err(Error::LengthMismatch {
                what: "feature rows vs labels",
                left: self.features.nrows(),
                right: self.labels.len(),
            });
        }
        if self.width() != self.manifest.width {
            return Err(Error::WidthMismatch {
                expected: self.manifest.width,
                actual: self.width(),
            });
        }
        let n_classes = self.manifest.class_names.len();
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {n_classes} classes")));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut buf = Vec::with_capacity(96 + 8 * self.features.len() + 4 * self.len());
        buf.extend_from_slice(DATASET_MAGIC);
        buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        buf.extend_from_slice(&[0; 4]);
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.width() as u64).to_le_bytes());
        buf.extend_from_slice(&self.manifest.digest());
        for x in self.features.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &l in &self.labels {
            buf.extend_from_slice(&(l as u32).to_le_bytes());
        }
        let d = Sha256::digest(&buf);
        buf.extend_from_slice(&d);
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8], manifest: FeatureSpec) -> Result<Dataset> {
        if bytes.len() < 64 + 32 || &bytes[..8] != DATASET_MAGIC {
            return Err(Error::Corrupted("not a dataset container".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Corrupted("dataset digest mismatch".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(body[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != DATASET_VERSION {
            return Err(Error::Corrupted(format!("unsupported dataset version {version}")));
        }
        let n = u64_at(16) as usize;
        let d = u64_at(24) as usize;
        if body[32..64] != manifest.digest() {
            return Err(Error::Manifest("manifest does not match the dataset container".into()));
        }
        let expected = n
            .checked_mul(d)
            .and_then(|nd| nd.checked_mul(8))
            .and_then(|b| b.checked_add(4 * n + 64));
        if expected != Some(body.len()) {
            return Err(Error::Corrupted("dataset size does not match its header".into()));
        }
        let feat = &body[64..64 + 8 * n * d];
        let values = feat
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let labels = body[64 + 8 * n * d..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
            .collect();
        let features = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Corrupted(e.to_string()))?;
        let ds = Dataset {
            features,
            labels,
            manifest,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes the container and its manifest file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let mpath = manifest_path(path);
        let json = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let manifest = load_manifest(&manifest_path(path))?;
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Dataset::from_bytes(&bytes, manifest)
    }
}

/// Receptive-field encoding with `m` fields per numeric column. The width
/// must come out at 312 for NSL-KDD and 206 for the 46-attribute AWID
/// selection.
pub fn encode_resampled(records: &RawRecords, spec: &FeatureSpec, m: usize) -> Result<Dataset> {
    if spec.encoding != (Encoding::Resampled { m }) {
        return Err(Error::Manifest(format!(
            "expected a resampled manifest with m = {m}, got {:?}",
            spec.encoding
        )));
    }
    let expected = match spec.dataset.as_str() {
        "nsl-kdd" => Some(nslkdd::RESAMPLED_WIDTH),
        "awid" if spec.columns.len() == awid::ORIGINAL_WIDTH => Some(awid::RESAMPLED_WIDTH),
        _ => None,
    };
    if let Some(expected) = expected {
        nslkdd::check_width(spec, expected)?;
    }
    spec.encode(records)
}

/// `<container>.manifest.json`.
pub fn manifest_path(container: &Path) -> PathBuf {
    let mut s = container.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn load_manifest(path: &Path) -> Result<FeatureSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: FeatureSpec = serde_json::from_str(&text)?;
    if spec.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(Error::Manifest(format!("unsupported manifest schema {}", spec.schema_version)));
    }
    Ok(spec)
}
