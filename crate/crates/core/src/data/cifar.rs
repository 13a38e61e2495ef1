use std::path::Path;

use super::idx::write_all;
use super::{read_file, Dataset, DatasetKind, Split};
use crate::error::{Error, Result};

/// One label byte followed by 3×32×32 channel-major pixels.
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;

/// Splits a binary batch file into `(labels, pixels)`.
pub fn parse_cifar_batch(bytes: &[u8], path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        let whole = bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN;
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: whole as u64,
            message: format!(
                "length {} is not a positive multiple of the {CIFAR_RECORD_LEN}-byte record",
                bytes.len()
            ),
        });
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_LEN - 1));
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        if record[0] >= 10 {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: (i * CIFAR_RECORD_LEN) as u64,
                message: format!("record {i} has label {}", record[0]),
            });
        }
        labels.push(record[0]);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok((labels, pixels))
}

/// Encodes one record.
pub fn cifar_record(label: u8, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), CIFAR_RECORD_LEN - 1, "a CIFAR record holds 3072 pixels");
    let mut out = Vec::with_capacity(CIFAR_RECORD_LEN);
    out.push(label);
    out.extend_from_slice(pixels);
    out
}

/// Writes `labels.len()` records; `pixels` holds 3072 bytes per label.
pub fn write_cifar_batch(path: &Path, labels: &[u8], pixels: &[u8]) -> Result<()> {
    let per = CIFAR_RECORD_LEN - 1;
    if pixels.len() != labels.len() * per {
        return Err(Error::Data(format!(
            "{} pixel bytes for {} records",
            pixels.len(),
            labels.len()
        )));
    }
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD_LEN);
    for (label, px) in labels.iter().zip(pixels.chunks_exact(per)) {
        out.extend(cifar_record(*label, px));
    }
    write_all(path, &out)
}

/// Reads CIFAR-10 binary batches from `dir` (or `dir/cifar-10-batches-bin`).
/// The training split is `data_batch_1.bin` … `data_batch_5.bin` in order.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Dataset> {
    let nested = dir.join("cifar-10-batches-bin");
    let root = if nested.is_dir() { nested.as_path() } else { dir };
    let files: Vec<String> = match split {
        Split::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
        Split::Test => vec!["test_batch.bin".to_string()],
    };
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for name in files {
        let path = root.join(name);
        let (l, p) = parse_cifar_batch(&read_file(&path)?, &path)?;
        labels.extend(l.into_iter().map(usize::from));
        pixels.extend(p);
    }
    Dataset::from_bytes(DatasetKind::Cifar10, split, pixels, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_batch_is_format_error() {
        let mut bytes = cifar_record(3, &[7u8; 3072]);
        bytes.extend(cifar_record(1, &[0u8; 3072]));
        bytes.pop();
        match parse_cifar_batch(&bytes, Path::new("b")) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, CIFAR_RECORD_LEN as u64),
            other => panic!("{other:?}"),
        }
        assert!(parse_cifar_batch(&[], Path::new("b")).is_err());
    }

    #[test]
    fn first_record_decodes() {
        let pattern: Vec<u8> = (0..3072).map(|i| (i % 251) as u8).collect();
        let mut bytes = cifar_record(6, &pattern);
        bytes.extend(cifar_record(2, &[9u8; 3072]));
        let (labels, pixels) = parse_cifar_batch(&bytes, Path::new("b")).unwrap();
        assert_eq!(labels, vec![6, 2]);
        assert_eq!(&pixels[..3072], &pattern[..]);
    }
}
