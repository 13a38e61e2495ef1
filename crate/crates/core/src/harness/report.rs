use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::ExperimentSpec;
use super::trial::{ExperimentResult, TrialResult};
use crate::error::{Error, Result};
use crate::schedule::{parse_schedule_spec, TraceRow};
use crate::stats::{mean, welch};

pub const RESULTS_HEADER: [&str; 4] = ["name", "avg_train", "avg_test", "p_value"];
pub const TRIALS_HEADER: [&str; 7] = [
    "trial",
    "seed",
    "method",
    "train_acc_eval",
    "train_acc_train",
    "test_acc",
    "seconds",
];
pub const TRACE_HEADER: [&str; 3] = ["step", "eta_c", "eta_i"];

const REPORT_NOTE: &str = "p_value: Welch two-sample t-test, two-tailed, on per-trial test accuracy against the baseline\n";

/// One experiment measured against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub name: String,
    pub method: String,
    pub test_accuracies: Vec<f64>,
    pub mean_train: f64,
    pub mean_test: f64,
    pub baseline: Option<String>,
    /// Empty for the baseline itself, with no baseline, or when either side
    /// has fewer than two trials.
    pub p_value: Option<f64>,
}

/// One parsed row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub name: String,
    pub avg_train: f64,
    pub avg_test: f64,
    pub p_value: Option<f64>,
}

fn is_single_rate(result: &ExperimentResult) -> bool {
    parse_schedule_spec(&result.method).is_ok_and(|c| c.is_single_rate())
}

/// The single-rate experiment with the best mean test accuracy; the first
/// one wins ties.
pub fn pick_baseline(results: &[ExperimentResult]) -> Result<String> {
    let mut best: Option<&ExperimentResult> = None;
    for r in results.iter().filter(|r| is_single_rate(r)) {
        if best.is_none_or(|b| r.mean_test() > b.mean_test()) {
            best = Some(r);
        }
    }
    best.map(|r| r.name.clone())
        .ok_or_else(|| Error::Config("no single-rate (etaS=...) experiment to use as the baseline".into()))
}

/// Builds one report per experiment, baseline first.
pub fn compare(results: &[ExperimentResult], baseline: Option<&str>) -> Result<Vec<ComparisonReport>> {
    let base = match baseline {
        Some(name) => Some(
            results
                .iter()
                .find(|r| r.name == name)
                .ok_or_else(|| Error::Config(format!("baseline `{name}` has no results")))?,
        ),
        None => None,
    };
    let ordered = base
        .into_iter()
        .chain(results.iter().filter(|r| Some(r.name.as_str()) != baseline));
    ordered
        .map(|r| {
            let tests = r.test_accuracies();
            let p_value = match base {
                Some(b) if b.name != r.name && tests.len() >= 2 && b.trials.len() >= 2 => {
                    Some(welch(&tests, &b.test_accuracies())?.p_value)
                }
                _ => None,
            };
            Ok(ComparisonReport {
                name: r.name.clone(),
                method: r.method.clone(),
                mean_train: r.mean_train(),
                mean_test: mean(&tests),
                test_accuracies: tests,
                baseline: base.map(|b| b.name.clone()),
                p_value,
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn finish<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn write_results_csv(path: &Path, reports: &[ComparisonReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.mean_train.to_string(),
            r.mean_test.to_string(),
            r.p_value.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w, path)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mut reader = open_csv(path, &RESULTS_HEADER)?;
    for record in reader.records() {
        let record = record?;
        rows.push(ResultRow {
            name: record[0].to_string(),
            avg_train: number(path, &record[1])?,
            avg_test: number(path, &record[2])?,
            p_value: match &record[3] {
                "" => None,
                p => Some(number(path, p)?),
            },
        });
    }
    Ok(rows)
}

pub fn write_trials_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRIALS_HEADER)?;
    for t in &result.trials {
        w.write_record([
            t.trial.to_string(),
            t.seed.to_string(),
            result.method.clone(),
            t.train_accuracy.to_string(),
            t.train_accuracy_train_mode.to_string(),
            t.test_accuracy.to_string(),
            format!("{:.3}", t.seconds),
        ])?;
    }
    finish(w, path)
}

/// Reads a `trials_<name>.csv` back. Traces are not part of that file and
/// come back empty.
pub fn read_trials_csv(path: &Path) -> Result<ExperimentResult> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("trials_"))
        .ok_or_else(|| Error::Data(format!("{} is not a trials_<name>.csv file", path.display())))?
        .to_string();
    let mut reader = open_csv(path, &TRIALS_HEADER)?;
    let mut method = None;
    let mut trials = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse_int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Data(format!("{}: `{s}` is not an integer", path.display())))
        };
        match &method {
            None => method = Some(record[2].to_string()),
            Some(m) if m != &record[2] => {
                return Err(Error::Data(format!("{}: mixed methods in one file", path.display())));
            }
            Some(_) => {}
        }
        trials.push(TrialResult {
            trial: parse_int(&record[0])? as usize,
            seed: parse_int(&record[1])?,
            train_accuracy: number(path, &record[3])?,
            train_accuracy_train_mode: number(path, &record[4])?,
            test_accuracy: number(path, &record[5])?,
            trace: Vec::new(),
            seconds: number(path, &record[6])?,
        });
    }
    let method = method.ok_or_else(|| Error::Data(format!("{} has no trials", path.display())))?;
    Ok(ExperimentResult { name, method, trials })
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for row in trace {
        w.write_record([row.step.to_string(), row.eta_c.to_string(), row.eta_i.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<trace>"), e))
}

/// Saves the spec next to its results so a run can be repeated with
/// `dvlr train --config`.
pub fn write_spec(dir: &Path, spec: &ExperimentSpec) -> Result<PathBuf> {
    let path = dir.join(format!("spec_{}.cfg", spec.name));
    fs::write(&path, spec.to_config()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Every `trials_*.csv` in `dir`, sorted by experiment name.
pub fn load_experiments(dir: &Path) -> Result<Vec<ExperimentResult>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("trials_") && name.ends_with(".csv") {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| read_trials_csv(p)).collect()
}

/// Writes per-trial CSVs and traces for each experiment, then `results.csv`
/// and `report.txt` for the whole set.
pub fn emit_report(results: &[ExperimentResult], baseline: Option<&str>, out: &Path) -> Result<Vec<ComparisonReport>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for r in results {
        write_trials_csv(&out.join(format!("trials_{}.csv", r.name)), r)?;
        for t in r.trials.iter().filter(|t| !t.trace.is_empty()) {
            let path = out.join(format!("trace_{}_{}.csv", r.name, t.trial));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_trace_csv(std::io::BufWriter::new(file), &t.trace)?;
        }
    }
    emit_tables(results, baseline, out)
}

/// Writes `results.csv` and `report.txt` only, leaving per-trial files alone.
pub fn emit_tables(
    results: &[ExperimentResult],
    baseline: Option<&str>,
    out: &Path,
) -> Result<Vec<ComparisonReport>> {
    let reports = compare(results, baseline)?;
    write_results_csv(&out.join("results.csv"), &reports)?;
    let mut text = String::from(REPORT_NOTE);
    if let Some(b) = baseline {
        text.push_str(&format!("baseline: {b}\n"));
    }
    text.push('\n');
    for r in &reports {
        text.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3} {:>10}  {}\n",
            r.name,
            r.mean_train,
            r.mean_test,
            r.p_value.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
            r.method
        ));
    }
    let path = out.join("report.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(reports)
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    if reader.headers()?.iter().ne(header.iter().copied()) {
        return Err(Error::Data(format!(
            "{}: expected header `{}`",
            path.display(),
            header.join(",")
        )));
    }
    Ok(reader)
}

fn number(path: &Path, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Data(format!("{}: `{s}` is not a number", path.display())))
}
