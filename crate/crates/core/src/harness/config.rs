use std::path::PathBuf;

use crate::data::DatasetKind;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::optim::OptimizerKind;
use crate::schedule::{format_schedule_spec, parse_schedule_spec, DualRateConfig, TieRule};

/// One `key=value` line of a config or plan file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits flat `key=value` text. Blank lines and `#` comments are skipped;
/// only the first `=` separates key from value.
pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut offset = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_start = offset;
        offset += raw.len() + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                position: line_start,
                message: format!("line {}: expected key=value, found `{line}`", i + 1),
            });
        };
        entries.push(Entry {
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: i + 1,
        });
    }
    Ok(entries)
}

fn field<T: std::str::FromStr>(entry: &Entry) -> Result<T> {
    entry.value.parse().map_err(|_| {
        Error::Config(format!(
            "line {}: `{}` is not a valid value for {}",
            entry.line, entry.value, entry.key
        ))
    })
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub schedule: DualRateConfig,
    /// Keep only this leading fraction of the training split.
    pub train_fraction: f64,
    /// Dataset root; falls back to `DVLR_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
}

/// Per-model defaults for batch size and epochs.
pub fn default_batch_size(model: ModelKind) -> usize {
    match model {
        ModelKind::Mlp => 100,
        ModelKind::MnistCnn => 128,
        ModelKind::CifarCnn => 10,
    }
}

pub fn default_epochs(model: ModelKind) -> usize {
    match model {
        ModelKind::Mlp => 20,
        ModelKind::MnistCnn | ModelKind::CifarCnn => 10,
    }
}

pub fn default_dataset(model: ModelKind) -> DatasetKind {
    match model {
        ModelKind::Mlp | ModelKind::MnistCnn => DatasetKind::Mnist,
        ModelKind::CifarCnn => DatasetKind::Cifar10,
    }
}

pub const DEFAULT_FINAL_TRIALS: usize = 10;
pub const DEFAULT_SEARCH_TRIALS: usize = 3;

impl ExperimentSpec {
    /// A spec with every per-model default filled in.
    pub fn new(name: impl Into<String>, model: ModelKind, schedule: DualRateConfig) -> Self {
        ExperimentSpec {
            name: name.into(),
            dataset: default_dataset(model),
            model,
            optimizer: OptimizerKind::Adagrad,
            batch_size: default_batch_size(model),
            epochs: default_epochs(model),
            trials: DEFAULT_FINAL_TRIALS,
            base_seed: 0,
            schedule,
            train_fraction: 1.0,
            data_dir: None,
        }
    }

    /// Parses a config file. `model` and `schedule` are required.
    pub fn from_config(text: &str) -> Result<Self> {
        Self::from_entries(&parse_key_values(text)?, &[])
    }

    /// Builds a spec from entries, ignoring any key listed in `extra_keys`
    /// (used by plan files, which add their own keys).
    pub fn from_entries(entries: &[Entry], extra_keys: &[&str]) -> Result<Self> {
        let lookup = |key: &str| entries.iter().rev().find(|e| e.key == key);
        let model: ModelKind = match lookup("model") {
            Some(e) => field(e)?,
            None => return Err(Error::Config("config is missing `model`".into())),
        };
        let schedule = match lookup("schedule") {
            Some(e) => parse_schedule_spec(&e.value).map_err(|err| {
                Error::Config(format!("line {}: schedule: {err}", e.line))
            })?,
            None if extra_keys.contains(&"schedule") => DualRateConfig::single(0.01),
            None => return Err(Error::Config("config is missing `schedule`".into())),
        };
        let mut spec = ExperimentSpec::new("experiment", model, schedule);

        for e in entries {
            match e.key.as_str() {
                "name" => spec.name = e.value.clone(),
                "dataset" => spec.dataset = field(e)?,
                "model" | "schedule" => {}
                "optimizer" => spec.optimizer = field(e)?,
                "batch_size" => spec.batch_size = field(e)?,
                "epochs" => spec.epochs = field(e)?,
                "trials" => spec.trials = field(e)?,
                "base_seed" => spec.base_seed = field(e)?,
                "train_fraction" => spec.train_fraction = field(e)?,
                "data_dir" => spec.data_dir = Some(PathBuf::from(&e.value)),
                "tie" => {
                    spec.schedule.tie = match e.value.as_str() {
                        "incorrect" => TieRule::Incorrect,
                        "correct" => TieRule::Correct,
                        _ => {
                            return Err(Error::Config(format!(
                                "line {}: tie must be `correct` or `incorrect`",
                                e.line
                            )))
                        }
                    }
                }
                other if extra_keys.contains(&other) => {}
                other => {
                    return Err(Error::Config(format!("line {}: unknown key `{other}`", e.line)));
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(|c: char| c == '/' || c == ',' || c.is_whitespace()) {
            return Err(Error::Config(format!(
                "name `{}` must be non-empty without whitespace, commas or slashes",
                self.name
            )));
        }
        for (what, v) in [("batch_size", self.batch_size), ("epochs", self.epochs), ("trials", self.trials)] {
            if v == 0 {
                return Err(Error::Config(format!("{what} must be positive")));
            }
        }
        let compatible = matches!(
            (self.dataset, self.model),
            (DatasetKind::Mnist, ModelKind::Mlp | ModelKind::MnistCnn) | (DatasetKind::Cifar10, ModelKind::CifarCnn)
        );
        if !compatible {
            return Err(Error::Config(format!(
                "model {} cannot run on dataset {}",
                self.model, self.dataset
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        self.schedule.validate()
    }

    /// The spec as config text that [`ExperimentSpec::from_config`] reads back.
    pub fn to_config(&self) -> String {
        let mut out = format!(
            "name={}\ndataset={}\nmodel={}\noptimizer={}\nbatch_size={}\nepochs={}\ntrials={}\nbase_seed={}\nschedule={}\n",
            self.name,
            self.dataset,
            self.model,
            self.optimizer,
            self.batch_size,
            self.epochs,
            self.trials,
            self.base_seed,
            format_schedule_spec(&self.schedule),
        );
        if self.schedule.tie == TieRule::Correct {
            out.push_str("tie=correct\n");
        }
        if self.train_fraction != 1.0 {
            out.push_str(&format!("train_fraction={}\n", self.train_fraction));
        }
        if let Some(dir) = &self.data_dir {
            out.push_str(&format!("data_dir={}\n", dir.display()));
        }
        out
    }

    /// Method string in schedule notation.
    pub fn method(&self) -> String {
        format_schedule_spec(&self.schedule)
    }
}
