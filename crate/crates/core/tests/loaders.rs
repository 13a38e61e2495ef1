mod common;

use std::path::Path;

use dvlr::data::{load, parse_cifar_batch, parse_idx_images, parse_idx_labels, DatasetKind, Split};
use dvlr::data::synthetic;
use dvlr::Error;
use proptest::prelude::*;

#[test]
fn mnist_fixture_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    common::write_mnist_fixture(dir.path(), 40, 12, 3);
    for (split, n) in [(Split::Train, 40), (Split::Test, 12)] {
        let loaded = load(DatasetKind::Mnist, dir.path(), split).unwrap();
        let expected = synthetic(DatasetKind::Mnist, split, n, 3);
        assert_eq!(loaded.pixels(), expected.pixels());
        assert_eq!(loaded.labels(), expected.labels());
    }
}

#[test]
fn cifar_fixture_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    common::write_cifar_fixture(dir.path(), 4, 6, 8);
    let train = load(DatasetKind::Cifar10, dir.path(), Split::Train).unwrap();
    let expected = synthetic(DatasetKind::Cifar10, Split::Train, 20, 8);
    assert_eq!(train.pixels(), expected.pixels());
    assert_eq!(train.labels(), expected.labels());
    assert_eq!(load(DatasetKind::Cifar10, dir.path(), Split::Test).unwrap().len(), 6);
}

#[test]
fn every_mnist_mutation_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    common::write_mnist_fixture(dir.path(), 30, 5, 1);
    let mutations = common::mnist_mutations(dir.path());
    assert_eq!(mutations.len(), 20);
    for m in &mutations {
        let broken = common::apply(dir.path(), m);
        match load(DatasetKind::Mnist, broken.path(), Split::Train) {
            Err(Error::Format { .. }) => {}
            other => panic!("{}: {other:?}", m.name),
        }
    }
}

#[test]
fn every_cifar_mutation_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    common::write_cifar_fixture(dir.path(), 3, 3, 1);
    let mutations = common::cifar_mutations(dir.path());
    assert_eq!(mutations.len(), 20);
    for m in &mutations {
        let broken = common::apply(dir.path(), m);
        let split = if m.file == "test_batch.bin" { Split::Test } else { Split::Train };
        match load(DatasetKind::Cifar10, broken.path(), split) {
            Err(Error::Format { .. }) => {}
            other => panic!("{}: {other:?}", m.name),
        }
    }
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load(DatasetKind::Mnist, dir.path(), Split::Train), Err(Error::Io { .. })));
    assert!(matches!(load(DatasetKind::Cifar10, dir.path(), Split::Test), Err(Error::Io { .. })));
}

proptest! {
    #[test]
    fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200), header in 0u32..4) {
        let mut b = bytes;
        if b.len() >= 4 {
            let magic = [2051u32, 2049, 0, 1][header as usize];
            b[..4].copy_from_slice(&magic.to_be_bytes());
        }
        let _ = parse_idx_images(&b, Path::new("x"));
        let _ = parse_idx_labels(&b, Path::new("x"));
        let _ = parse_cifar_batch(&b, Path::new("x"));
    }
}
