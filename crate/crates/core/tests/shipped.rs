use std::fs;
use std::path::{Path, PathBuf};

use dvlr::harness::ExperimentSpec;
use dvlr::schedule::format_schedule_spec;
use dvlr::search::{SearchPlan, Stage};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn files(dir: &str, ext: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(repo().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    out
}

#[test]
fn configs_parse_and_round_trip() {
    let configs = files("configs", "cfg");
    assert_eq!(configs.len(), 13);
    for path in configs {
        let spec = ExperimentSpec::from_config(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(Some(spec.name.as_str()), path.file_stem().and_then(|s| s.to_str()));
        assert_eq!(ExperimentSpec::from_config(&spec.to_config()).unwrap(), spec);
    }
}

#[test]
fn cifar_plans_match_the_appendix_table_sizes() {
    let plans = files("plans/cifar_cnn", "plan");
    let expected = [
        (Stage::SsSweep, 10),
        (Stage::SdGrid, 10),
        (Stage::OneVariable, 25),
        (Stage::Combine, 12),
        (Stage::Directions, 8),
        (Stage::Finals, 7),
    ];
    assert_eq!(plans.len(), expected.len());
    let empty = tempfile::tempdir().unwrap();
    for (path, (stage, rows)) in plans.iter().zip(expected) {
        let plan = SearchPlan::parse(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(plan.stage, stage);
        let candidates = plan.resolve_candidates(empty.path()).unwrap();
        assert_eq!(candidates.len(), rows, "{}", path.display());
        for c in &candidates {
            // every method string survives the notation round trip
            let text = format_schedule_spec(c);
            assert_eq!(dvlr::schedule::parse_schedule_spec(&text).unwrap(), *c);
        }
    }
}
