#![allow(dead_code)]

use std::path::Path;

use dvlr::data::{synthetic, write_cifar_batch, write_idx_images, write_idx_labels, Dataset, DatasetKind, Split};

/// Writes synthetic MNIST-shaped IDX files into `dir`.
pub fn write_mnist_fixture(dir: &Path, n_train: usize, n_test: usize, seed: u64) {
    for (split, n, prefix) in [(Split::Train, n_train, "train"), (Split::Test, n_test, "t10k")] {
        let ds = synthetic(DatasetKind::Mnist, split, n, seed);
        write_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")), 28, 28, ds.pixels()).unwrap();
        write_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")), &labels_u8(&ds)).unwrap();
    }
}

/// Writes synthetic CIFAR-shaped batch files into `dir`, spreading the
/// training examples over the five training batches.
pub fn write_cifar_fixture(dir: &Path, per_batch: usize, n_test: usize, seed: u64) {
    let train = synthetic(DatasetKind::Cifar10, Split::Train, per_batch * 5, seed);
    let stride = 3 * 32 * 32;
    let labels = labels_u8(&train);
    for b in 0..5 {
        let range = b * per_batch..(b + 1) * per_batch;
        write_cifar_batch(
            &dir.join(format!("data_batch_{}.bin", b + 1)),
            &labels[range.clone()],
            &train.pixels()[range.start * stride..range.end * stride],
        )
        .unwrap();
    }
    let test = synthetic(DatasetKind::Cifar10, Split::Test, n_test, seed);
    write_cifar_batch(&dir.join("test_batch.bin"), &labels_u8(&test), test.pixels()).unwrap();
}

pub fn labels_u8(ds: &Dataset) -> Vec<u8> {
    ds.labels().iter().map(|&l| l as u8).collect()
}

/// A corrupted copy of one fixture file.
pub struct Mutation {
    pub name: &'static str,
    pub file: &'static str,
    pub bytes: Vec<u8>,
}

fn set_u32(bytes: &mut [u8], offset: usize, v: u32) {
    bytes[offset..offset + 4].copy_from_slice(&v.to_be_bytes());
}

fn edit(bytes: &[u8], f: impl FnOnce(&mut Vec<u8>)) -> Vec<u8> {
    let mut b = bytes.to_vec();
    f(&mut b);
    b
}

/// Twenty ways to break an MNIST fixture written by [`write_mnist_fixture`].
/// Every one must be rejected with a format error.
pub fn mnist_mutations(dir: &Path) -> Vec<Mutation> {
    const IMAGES: &str = "train-images-idx3-ubyte";
    const LABELS: &str = "train-labels-idx1-ubyte";
    let img = std::fs::read(dir.join(IMAGES)).unwrap();
    let lab = std::fs::read(dir.join(LABELS)).unwrap();
    let count = u32::from_be_bytes([img[4], img[5], img[6], img[7]]);
    let m = |name, file, bytes| Mutation { name, file, bytes };
    vec![
        m("image magic flipped", IMAGES, edit(&img, |b| b[3] ^= 0x01)),
        m("image file with label magic", IMAGES, edit(&img, |b| set_u32(b, 0, 2049))),
        m("image header cut short", IMAGES, img[..10].to_vec()),
        m("empty image file", IMAGES, Vec::new()),
        m("image pixels truncated", IMAGES, img[..img.len() - 100].to_vec()),
        m("image trailing byte", IMAGES, edit(&img, |b| b.push(0))),
        m("image count too high", IMAGES, edit(&img, |b| set_u32(b, 4, count + 1))),
        m("image count too low", IMAGES, edit(&img, |b| set_u32(b, 4, count - 1))),
        m("zero rows", IMAGES, edit(&img, |b| set_u32(b, 8, 0))),
        m("27 rows", IMAGES, edit(&img, |b| set_u32(b, 8, 27))),
        m("count near u32 max", IMAGES, edit(&img, |b| set_u32(b, 4, u32::MAX))),
        m("huge image dims", IMAGES, edit(&img, |b| {
            set_u32(b, 8, 65_535);
            set_u32(b, 12, 65_535);
        })),
        m("label magic flipped", LABELS, edit(&lab, |b| b[2] ^= 0x10)),
        m("label file with image magic", LABELS, edit(&lab, |b| set_u32(b, 0, 2051))),
        m("label header cut short", LABELS, lab[..6].to_vec()),
        m("last label missing", LABELS, lab[..lab.len() - 1].to_vec()),
        m("label trailing byte", LABELS, edit(&lab, |b| b.push(3))),
        m("label 10", LABELS, edit(&lab, |b| b[8] = 10)),
        m("label 255", LABELS, edit(&lab, |b| *b.last_mut().unwrap() = 255)),
        m("fewer labels than images", LABELS, edit(&lab, |b| {
            b.pop();
            let n = (b.len() - 8) as u32;
            set_u32(b, 4, n);
        })),
    ]
}

/// Twenty ways to break a CIFAR fixture written by [`write_cifar_fixture`]
/// with at least three records per batch.
pub fn cifar_mutations(dir: &Path) -> Vec<Mutation> {
    use dvlr::data::CIFAR_RECORD_LEN as R;
    let read = |f: &str| std::fs::read(dir.join(f)).unwrap();
    let (b1, b2, b3, b4, b5, t) = (
        read("data_batch_1.bin"),
        read("data_batch_2.bin"),
        read("data_batch_3.bin"),
        read("data_batch_4.bin"),
        read("data_batch_5.bin"),
        read("test_batch.bin"),
    );
    let m = |name, file, bytes| Mutation { name, file, bytes };
    let last_label = |b: &[u8]| b.len() - R;
    vec![
        m("empty batch", "data_batch_1.bin", Vec::new()),
        m("single byte", "data_batch_1.bin", vec![0]),
        m("last byte missing", "data_batch_1.bin", b1[..b1.len() - 1].to_vec()),
        m("one extra byte", "data_batch_1.bin", edit(&b1, |b| b.push(0))),
        m("partial extra record", "data_batch_1.bin", edit(&b1, |b| b.extend(vec![1; R - 1]))),
        m("first label 10", "data_batch_1.bin", edit(&b1, |b| b[0] = 10)),
        m("last label 255", "data_batch_1.bin", edit(&b1, |b| {
            let i = last_label(b);
            b[i] = 255;
        })),
        m("middle label 11", "data_batch_2.bin", edit(&b2, |b| b[R] = 11)),
        m("cut in half", "data_batch_3.bin", b3[..b3.len() / 2].to_vec()),
        m("first byte missing", "data_batch_4.bin", b4[1..].to_vec()),
        m("extra record with label 200", "data_batch_5.bin", edit(&b5, |b| {
            b.push(200);
            b.extend(vec![0; R - 1]);
        })),
        m("empty test batch", "test_batch.bin", Vec::new()),
        m("test batch short 100 bytes", "test_batch.bin", t[..t.len() - 100].to_vec()),
        m("test label 10", "test_batch.bin", edit(&t, |b| b[0] = 10)),
        m("test batch extra byte", "test_batch.bin", edit(&t, |b| b.push(9))),
        m("only pixels of one record", "data_batch_5.bin", b5[..R - 1].to_vec()),
        m("every label 10", "data_batch_2.bin", edit(&b2, |b| {
            for i in (0..b.len()).step_by(R) {
                b[i] = 10;
            }
        })),
        m("one record and a byte", "test_batch.bin", t[..R + 1].to_vec()),
        m("last label 128", "data_batch_3.bin", edit(&b3, |b| {
            let i = last_label(b);
            b[i] = 128;
        })),
        m("two records less one byte appended", "data_batch_1.bin", edit(&b1, |b| b.extend(vec![2; 2 * R - 1]))),
    ]
}

/// Copies every file of `src` into a fresh temp dir and overwrites one.
pub fn apply(src: &Path, mutation: &Mutation) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, dir.path().join(path.file_name().unwrap())).unwrap();
    }
    std::fs::write(dir.path().join(mutation.file), &mutation.bytes).unwrap();
    dir
}
