//! MNIST and CIFAR-10 loading, plus deterministic shuffling and batching.
//!
//! Pixels are kept as raw bytes and scaled by `1/255` when a batch tensor is
//! materialised, so a loaded training set costs one byte per pixel.

mod batches;
mod cifar;
mod idx;
mod synthetic;

pub use batches::{make_batches, Batch, BatchPlan};
pub use cifar::{cifar_record, load_cifar10, parse_cifar_batch, write_cifar_batch, CIFAR_RECORD_LEN};
pub use idx::{
    load_mnist, parse_idx_images, parse_idx_labels, write_idx_images, write_idx_labels, IDX_IMAGE_MAGIC,
    IDX_LABEL_MAGIC,
};
pub use synthetic::synthetic;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

impl DatasetKind {
    /// `[C, H, W]` of one example.
    pub fn example_shape(self) -> [usize; 3] {
        match self {
            DatasetKind::Mnist => [1, 28, 28],
            DatasetKind::Cifar10 => [3, 32, 32],
        }
    }

    /// Number of examples in the published split.
    pub fn canonical_len(self, split: Split) -> usize {
        match (self, split) {
            (DatasetKind::Mnist, Split::Train) => 60_000,
            (DatasetKind::Cifar10, Split::Train) => 50_000,
            (_, Split::Test) => 10_000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar10 => "cifar10",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected mnist or cifar10)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

/// An immutable labelled image set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    kind: DatasetKind,
    split: Split,
    /// `len × C×H×W` bytes, example-major.
    pixels: Vec<u8>,
    labels: Vec<usize>,
}

impl Dataset {
    /// Checks that there is one label per image and every label is a digit.
    pub fn from_bytes(kind: DatasetKind, split: Split, pixels: Vec<u8>, labels: Vec<usize>) -> Result<Self> {
        let [c, h, w] = kind.example_shape();
        let stride = c * h * w;
        if labels.is_empty() {
            return Err(Error::Data("dataset has no examples".into()));
        }
        if pixels.len() != labels.len() * stride {
            return Err(Error::Data(format!(
                "{} pixel bytes for {} labels of {stride} bytes each",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= 10) {
            return Err(Error::Data(format!("label {bad} outside [0, 10)")));
        }
        Ok(Dataset {
            kind,
            split,
            pixels,
            labels,
        })
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn stride(&self) -> usize {
        self.kind.example_shape().iter().product()
    }

    /// Raw bytes of example `i`.
    pub fn example_bytes(&self, i: usize) -> &[u8] {
        let s = self.stride();
        &self.pixels[i * s..(i + 1) * s]
    }

    /// `indices.len() × C×H×W` tensor with pixels scaled to `[0, 1]`.
    pub fn images(&self, indices: &[usize]) -> Result<Tensor> {
        let [c, h, w] = self.kind.example_shape();
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Dimension(format!(
                    "example {i} out of range for dataset of {}",
                    self.len()
                )));
            }
            data.extend(self.example_bytes(i).iter().map(|&b| f64::from(b) / 255.0));
        }
        Tensor::new(&[indices.len(), c, h, w], data)
    }

    /// The first `n` examples.
    pub fn truncated(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::Config(format!(
                "cannot keep {n} of {} examples",
                self.len()
            )));
        }
        Ok(Dataset {
            kind: self.kind,
            split: self.split,
            pixels: self.pixels[..n * self.stride()].to_vec(),
            labels: self.labels[..n].to_vec(),
        })
    }
}

/// Loads `split` of `kind` from `dir` in its standard binary format.
pub fn load(kind: DatasetKind, dir: &Path, split: Split) -> Result<Dataset> {
    match kind {
        DatasetKind::Mnist => load_mnist(dir, split),
        DatasetKind::Cifar10 => load_cifar10(dir, split),
    }
}

/// The first existing file among `candidates` under `dir`, else the first
/// candidate (so the not-found error names the canonical file).
pub(crate) fn locate(dir: &Path, candidates: &[&str]) -> PathBuf {
    candidates
        .iter()
        .map(|c| dir.join(c))
        .find(|p| p.is_file())
        .unwrap_or_else(|| dir.join(candidates[0]))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
