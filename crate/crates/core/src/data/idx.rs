use std::io::Write;
use std::path::Path;

use super::{locate, read_file, Dataset, DatasetKind, Split};
use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

fn format_error<T>(path: &Path, offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    })
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => format_error(path, bytes.len(), format!("file ends inside the header field at byte {offset}")),
    }
}

/// Decodes an IDX3 image file: `(rows, cols, pixels)` with `count·rows·cols`
/// pixel bytes.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IDX_IMAGE_MAGIC {
        return format_error(path, 0, format!("magic {magic}, expected {IDX_IMAGE_MAGIC} for an image file"));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    if rows == 0 || cols == 0 {
        return format_error(path, 8, format!("degenerate image size {rows}×{cols}"));
    }
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_add(16));
    match expected {
        Some(len) if len == bytes.len() => Ok((rows, cols, bytes[16..].to_vec())),
        Some(len) if len > bytes.len() => format_error(
            path,
            bytes.len(),
            format!("truncated: header declares {count} images of {rows}×{cols}, needing {len} bytes"),
        ),
        Some(len) => format_error(path, len, "trailing bytes after the last image"),
        None => format_error(path, 4, "declared size overflows"),
    }
}

/// Decodes an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IDX_LABEL_MAGIC {
        return format_error(path, 0, format!("magic {magic}, expected {IDX_LABEL_MAGIC} for a label file"));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let needed = count.checked_add(8);
    match needed {
        Some(len) if len == bytes.len() => {}
        Some(len) if len > bytes.len() => {
            return format_error(path, bytes.len(), format!("truncated: header declares {count} labels"))
        }
        Some(len) => return format_error(path, len, "trailing bytes after the last label"),
        None => return format_error(path, 4, "declared size overflows"),
    }
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l >= 10) {
        return format_error(path, 8 + pos, format!("label {} is not a digit", labels[pos]));
    }
    Ok(labels)
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    write_all(path, &out)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    write_all(path, &out)
}

pub(crate) fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Reads the MNIST IDX pair for `split` from `dir`.
///
/// Looks for `train-images-idx3-ubyte` / `train-labels-idx1-ubyte` (or the
/// `t10k-` pair for the test split), also accepting the `.idx3-ubyte` spelling.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images_path = locate(
        dir,
        &[&format!("{prefix}-images-idx3-ubyte"), &format!("{prefix}-images.idx3-ubyte")],
    );
    let labels_path = locate(
        dir,
        &[&format!("{prefix}-labels-idx1-ubyte"), &format!("{prefix}-labels.idx1-ubyte")],
    );
    let (rows, cols, pixels) = parse_idx_images(&read_file(&images_path)?, &images_path)?;
    if (rows, cols) != (28, 28) {
        return format_error(&images_path, 8, format!("MNIST images must be 28×28, found {rows}×{cols}"));
    }
    let labels = parse_idx_labels(&read_file(&labels_path)?, &labels_path)?;
    if labels.len() * 784 != pixels.len() {
        return format_error(
            &labels_path,
            4,
            format!("{} labels but {} images", labels.len(), pixels.len() / 784),
        );
    }
    Dataset::from_bytes(
        DatasetKind::Mnist,
        split,
        pixels,
        labels.into_iter().map(usize::from).collect(),
    )
}
