//! Datasets: synthetic ground-truth-factor generation, feature-file
//! ingestion, batching and label conventions.

mod batch;
mod csv;
mod mindf;
mod synthetic;

pub use self::batch::{batches, BatchMode, ModalityBatch};
pub use self::csv::{read_csv_dir, write_csv_dir};
pub use self::mindf::{read_mindf, write_mindf, MINDF_MAGIC, MINDF_VERSION};
pub use self::synthetic::{generate_synthetic, SyntheticSpec};

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::Targets;
use crate::nn::{Modality, TaskKind};
use crate::tensor::Array;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic {0:?}, not a MNDF feature container")]
    BadMagic([u8; 4]),
    #[error("unsupported MNDF version {0}")]
    Version(u32),
    #[error("file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("header declares {expected} payload bytes but {actual} are present")]
    PayloadMismatch { expected: usize, actual: usize },
    #[error("non-finite feature in modality {modality}, row {row}, column {col}")]
    NonFinite { modality: Modality, row: usize, col: usize },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("csv {path}: {msg}")]
    Csv { path: PathBuf, msg: String },
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("batch size {0} is too small for training, need at least 2")]
    BatchSize(usize),
    #[error("split {0} is empty")]
    EmptySplit(Split),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Split::Train),
            1 => Some(Split::Valid),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "val" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, valid or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Scores(Vec<f64>),
    Classes { labels: Vec<u32>, classes: u32 },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Scores(v) => v.len(),
            Labels::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Labels::Scores(_) => TaskKind::Regression,
            Labels::Classes { classes, .. } => TaskKind::Classification {
                classes: *classes as usize,
            },
        }
    }

    pub fn targets(&self, idx: &[usize]) -> Targets {
        match self {
            Labels::Scores(v) => Targets::Scores(idx.iter().map(|&i| v[i]).collect()),
            Labels::Classes { labels, classes } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i] as usize).collect(),
                classes: *classes as usize,
            },
        }
    }

    /// Label of sample `i` as a real number (class index for classification).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Labels::Scores(v) => v[i],
            Labels::Classes { labels, .. } => f64::from(labels[i]),
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { spec_hash: String },
    File { path: PathBuf },
}

/// Ground-truth latent factors of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    /// `n × d_s`.
    pub shared: Array<f64>,
    /// `n × d_p` per modality.
    pub private: [Array<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d_m` per modality, V, A, T order.
    pub features: [Array<f64>; 3],
    pub labels: Labels,
    pub splits: Vec<Split>,
    pub provenance: Provenance,
    pub factors: Option<Factors>,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.labels.len();
        for m in Modality::ALL {
            let x = &self.features[m.index()];
            if x.rows() != n {
                return Err(DataError::Header(format!(
                    "modality {m} has {} rows but there are {n} labels",
                    x.rows()
                )));
            }
            let c = x.cols();
            if let Some(k) = x.data().iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    modality: m,
                    row: k / c,
                    col: k % c,
                });
            }
        }
        if self.splits.len() != n {
            return Err(DataError::Header(format!(
                "{} split tags for {n} samples",
                self.splits.len()
            )));
        }
        if let Labels::Classes { labels, classes } = &self.labels {
            if let Some(&l) = labels.iter().find(|&&l| l >= *classes) {
                return Err(DataError::Header(format!("class label {l} out of range 0..{classes}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dims(&self) -> [usize; 3] {
        Modality::ALL.map(|m| self.features[m.index()].cols())
    }

    pub fn task(&self) -> TaskKind {
        self.labels.task()
    }

    /// Sample indices of one split, ascending.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Features, labels and split tags agree; provenance and factors are ignored.
    pub fn same_content(&self, other: &Dataset) -> bool {
        self.features == other.features && self.labels == other.labels && self.splits == other.splits
    }
}

/// Loads a MNDF container, or a CSV directory when `path` is a directory.
pub fn load_features(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut ds = if path.is_dir() {
        read_csv_dir(path)?
    } else {
        let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
        read_mindf(&bytes)?
    };
    ds.provenance = Provenance::File {
        path: path.to_path_buf(),
    };
    Ok(ds)
}

pub fn write_features(path: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, write_mindf(ds)?).map_err(|e| DataError::io(path, e))
}

/// Sentiment score to a 7-class bin: round half away from zero, clamp to
/// `[-3, 3]`, shift by 3.
pub fn label_to_class7(score: f64) -> u8 {
    (score.round().clamp(-3.0, 3.0) + 3.0) as u8
}
