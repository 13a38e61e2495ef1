use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentSpec;
use crate::data::{self, make_batches, Dataset, Split};
use crate::error::{Error, Result};
use crate::models::{argmax_rows, init_model, Model};
use crate::optim::Optimizer;
use crate::schedule::{BatchOutcome, Scheduler, TraceRow};
use crate::seed::{derive, stream, trial_seed, Purpose};
use crate::tensor::softmax_cross_entropy;

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "DVLR_DATA_DIR";

/// Outcome of one seeded training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// Accuracy (%) on the training split with the model in eval mode.
    pub train_accuracy: f64,
    /// Accuracy (%) over the final epoch's training batches as they were
    /// trained, i.e. with dropout active.
    pub train_accuracy_train_mode: f64,
    pub test_accuracy: f64,
    pub trace: Vec<TraceRow>,
    pub seconds: f64,
}

impl TrialResult {
    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &TrialResult) -> bool {
        TrialResult {
            seconds: 0.0,
            ..self.clone()
        } == TrialResult {
            seconds: 0.0,
            ..other.clone()
        }
    }
}

/// All trials of one experiment and their means.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub name: String,
    pub method: String,
    pub trials: Vec<TrialResult>,
}

impl ExperimentResult {
    pub fn test_accuracies(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.test_accuracy).collect()
    }

    pub fn mean_train(&self) -> f64 {
        crate::stats::mean(&self.trials.iter().map(|t| t.train_accuracy).collect::<Vec<_>>())
    }

    pub fn mean_train_train_mode(&self) -> f64 {
        crate::stats::mean(&self.trials.iter().map(|t| t.train_accuracy_train_mode).collect::<Vec<_>>())
    }

    pub fn mean_test(&self) -> f64 {
        crate::stats::mean(&self.test_accuracies())
    }
}

/// Train and test splits for a spec, with `train_fraction` applied.
#[derive(Debug, Clone)]
pub struct DataPair {
    pub train: Dataset,
    pub test: Dataset,
}

impl DataPair {
    pub fn new(train: Dataset, test: Dataset) -> Self {
        DataPair { train, test }
    }

    /// Reads both splits from disk; see [`resolve_data_root`].
    pub fn load(spec: &ExperimentSpec, override_dir: Option<&Path>) -> Result<Self> {
        let root = resolve_data_root(spec, override_dir)?;
        let train = data::load(spec.dataset, &root, Split::Train)?;
        let test = data::load(spec.dataset, &root, Split::Test)?;
        Ok(DataPair { train, test })
    }

    fn training_set(&self, spec: &ExperimentSpec) -> Result<std::borrow::Cow<'_, Dataset>> {
        if spec.train_fraction >= 1.0 {
            return Ok(std::borrow::Cow::Borrowed(&self.train));
        }
        let keep = ((self.train.len() as f64) * spec.train_fraction).ceil() as usize;
        Ok(std::borrow::Cow::Owned(self.train.truncated(keep.max(1))?))
    }
}

/// The dataset root is `override_dir`, else `spec.data_dir`, else
/// `$DVLR_DATA_DIR`. A `<root>/<dataset>` subdirectory is used when present.
pub fn resolve_data_root(spec: &ExperimentSpec, override_dir: Option<&Path>) -> Result<PathBuf> {
    let root = override_dir
        .map(Path::to_path_buf)
        .or_else(|| spec.data_dir.clone())
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            Error::Config(format!(
                "no dataset directory: set data_dir in the config, pass --data-dir, or set {DATA_DIR_ENV}"
            ))
        })?;
    let nested = root.join(spec.dataset.name());
    Ok(if nested.is_dir() { nested } else { root })
}

/// A finished trial with its final parameters, for callers that need more
/// than the summary numbers.
#[derive(Debug, Clone)]
pub struct TrainedTrial {
    pub result: TrialResult,
    pub model: Model,
}

/// How the per-batch learning rate is chosen.
enum RateSource {
    Dual(Box<Scheduler>),
    /// Plain training at one fixed rate; no scheduler is constructed.
    Single(f64),
}

/// Runs trial `trial` of `spec` on in-memory data.
///
/// Per batch: training-mode forward, batch outcome from the argmax of those
/// logits, cross-entropy gradient, rate selection, optimizer step, then the
/// outcome is recorded into the scheduler. Evaluation after the last epoch is
/// in eval mode.
pub fn train_trial(spec: &ExperimentSpec, data: &DataPair, trial: usize) -> Result<TrainedTrial> {
    let seed = trial_seed(spec.base_seed, trial);
    let scheduler = Scheduler::new(spec.schedule, derive(seed, Purpose::Scheduler))?;
    train(spec, data, trial, RateSource::Dual(Box::new(scheduler)))
}

/// Ordinary single-rate training of `spec`'s model at `eta`, sharing every
/// seed with [`train_trial`]. With both schedules static at `eta`,
/// [`train_trial`] must reproduce this bit for bit.
pub fn train_single_rate(spec: &ExperimentSpec, data: &DataPair, trial: usize, eta: f64) -> Result<TrainedTrial> {
    train(spec, data, trial, RateSource::Single(eta))
}

fn train(spec: &ExperimentSpec, data: &DataPair, trial: usize, mut rates: RateSource) -> Result<TrainedTrial> {
    spec.validate()?;
    if data.train.kind() != spec.dataset || data.test.kind() != spec.dataset {
        return Err(Error::Config(format!(
            "spec `{}` wants {} data but was given {}/{}",
            spec.name,
            spec.dataset,
            data.train.kind(),
            data.test.kind()
        )));
    }
    let started = Instant::now();
    let seed = trial_seed(spec.base_seed, trial);
    let train_set = data.training_set(spec)?;
    let batch_size = spec.batch_size.min(train_set.len());

    let mut model = init_model(spec.model, &mut stream(derive(seed, Purpose::Init)));
    let mut dropout_rng = stream(derive(seed, Purpose::Dropout));
    let shuffle_seed = derive(seed, Purpose::Shuffle);
    let mut optimizer = Optimizer::new(spec.optimizer, &model.parameters());

    let mut step: u64 = 0;
    let mut last_epoch_correct = 0u64;
    let mut last_epoch_seen = 0u64;
    for epoch in 0..spec.epochs {
        last_epoch_correct = 0;
        last_epoch_seen = 0;
        for batch in make_batches(&train_set, batch_size, shuffle_seed, epoch as u64)? {
            let batch = batch?;
            let (logits, cache) = model.forward(&batch.images, true, &mut dropout_rng)?;
            let outcome = BatchOutcome::from_predictions(&argmax_rows(&logits)?, &batch.labels)?;
            let (_, grad_logits) = softmax_cross_entropy(&logits, &batch.labels)?;
            let grads = model.backward(&cache, &grad_logits)?;
            let eta = match &rates {
                RateSource::Dual(s) => s.select_rate(outcome),
                RateSource::Single(eta) => *eta,
            };
            optimizer.step(&mut model.parameters_mut(), &grads, eta)?;
            if let RateSource::Dual(s) = &mut rates {
                s.record_responses(outcome, step)?;
            }
            step += 1;
            last_epoch_correct += outcome.n_correct;
            last_epoch_seen += outcome.total();
        }
    }

    let train_accuracy = accuracy(&model, &train_set)?;
    let test_accuracy = accuracy(&model, &data.test)?;
    let trace = match rates {
        RateSource::Dual(s) => s.into_trace(),
        RateSource::Single(_) => Vec::new(),
    };
    Ok(TrainedTrial {
        result: TrialResult {
            trial,
            seed,
            train_accuracy,
            train_accuracy_train_mode: 100.0 * last_epoch_correct as f64 / last_epoch_seen.max(1) as f64,
            test_accuracy,
            trace,
            seconds: started.elapsed().as_secs_f64(),
        },
        model,
    })
}

/// Eval-mode accuracy in percent.
pub fn accuracy(model: &Model, dataset: &Dataset) -> Result<f64> {
    const CHUNK: usize = 500;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..dataset.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let predicted = model.predict(&dataset.images(chunk)?)?;
        correct += predicted
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == dataset.labels()[i])
            .count();
    }
    Ok(100.0 * correct as f64 / dataset.len() as f64)
}

/// Runs trial `trial` of `spec`.
pub fn run_trial(spec: &ExperimentSpec, data: &DataPair, trial: usize) -> Result<TrialResult> {
    train_trial(spec, data, trial).map(|t| t.result)
}

/// Runs all `spec.trials` trials, at most `jobs` at a time. Results are in
/// trial order regardless of completion order.
pub fn run_experiment(spec: &ExperimentSpec, data: &DataPair, jobs: usize) -> Result<ExperimentResult> {
    let trials = with_pool(jobs, || {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, data, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentResult {
        name: spec.name.clone(),
        method: spec.method(),
        trials,
    })
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(f)
}
