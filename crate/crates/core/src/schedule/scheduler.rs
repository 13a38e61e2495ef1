use rand::Rng;

use super::{DualRateConfig, RateMode, RateSchedule, TieRule};
use crate::error::{Error, Result};
use crate::seed::{mix, stream, Stream};

/// Correct / incorrect prediction counts of one training batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BatchOutcome {
    pub n_correct: u64,
    pub n_incorrect: u64,
}

impl BatchOutcome {
    pub fn new(n_correct: u64, n_incorrect: u64) -> Result<Self> {
        if n_correct + n_incorrect == 0 {
            return Err(Error::Data("a batch outcome needs at least one response".into()));
        }
        Ok(BatchOutcome {
            n_correct,
            n_incorrect,
        })
    }

    /// Counts agreement between predictions and labels.
    pub fn from_predictions(predicted: &[usize], labels: &[usize]) -> Result<Self> {
        if predicted.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} labels",
                predicted.len(),
                labels.len()
            )));
        }
        let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count() as u64;
        BatchOutcome::new(correct, labels.len() as u64 - correct)
    }

    pub fn total(&self) -> u64 {
        self.n_correct + self.n_incorrect
    }
}

/// One row of the learning-rate trace: rates in force after batch `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub eta_c: f64,
    pub eta_i: f64,
}

/// Live state of one rate.
#[derive(Debug, Clone)]
struct Track {
    schedule: RateSchedule,
    current: f64,
    count: u64,
    threshold: Option<u64>,
    triggers: u64,
    rng: Option<Stream>,
}

impl Track {
    fn new(schedule: RateSchedule, seed: u64) -> Self {
        let mut track = Track {
            schedule,
            current: schedule.initial,
            count: 0,
            threshold: None,
            triggers: 0,
            rng: None,
        };
        if let RateMode::Variable(vt) = schedule.mode {
            let mut rng = stream(seed);
            track.threshold = Some(rng.gen_range(vt.lo..=vt.hi));
            track.rng = Some(rng);
        }
        track
    }

    fn add(&mut self, responses: u64) {
        let RateMode::Variable(vt) = self.schedule.mode else {
            return;
        };
        let rng = self.rng.as_mut().expect("variable track has a stream");
        let threshold = self.threshold.as_mut().expect("variable track has a threshold");
        self.count += responses;
        while self.count >= *threshold {
            self.count -= *threshold;
            self.triggers += 1;
            *threshold = rng.gen_range(vt.lo..=vt.hi);
        }
        // η⁰ ± k·δ in one rounding, floored at zero
        let moved = self.schedule.initial
            + vt.direction.sign() * (self.triggers as f64 * self.schedule.step_size());
        self.current = moved.max(0.0);
    }
}

/// Dual learning-rate state for one training run.
///
/// Each variable schedule draws its thresholds from its own stream, so the
/// correct-response and incorrect-response sides evolve independently of each
/// other and of the order in which batches interleave them.
#[derive(Debug, Clone)]
pub struct Scheduler {
    config: DualRateConfig,
    correct: Track,
    incorrect: Track,
    trace: Vec<TraceRow>,
}

const CORRECT_SALT: u64 = 0xC0;
const INCORRECT_SALT: u64 = 0x1C;

impl Scheduler {
    /// Rates start at their initial values; each variable schedule draws its
    /// first threshold. Static schedules consume no randomness.
    pub fn new(config: DualRateConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Scheduler {
            correct: Track::new(config.correct, mix(seed, CORRECT_SALT)),
            incorrect: Track::new(config.incorrect, mix(seed, INCORRECT_SALT)),
            config,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &DualRateConfig {
        &self.config
    }

    /// The rate to train this batch with. Reads state only.
    pub fn select_rate(&self, outcome: BatchOutcome) -> f64 {
        use std::cmp::Ordering::*;
        match outcome.n_correct.cmp(&outcome.n_incorrect) {
            Greater => self.correct.current,
            Less => self.incorrect.current,
            Equal => match self.config.tie {
                TieRule::Incorrect => self.incorrect.current,
                TieRule::Correct => self.correct.current,
            },
        }
    }

    /// Feeds one batch's responses into both counters, applies every
    /// threshold crossing, and appends a trace row for `step`.
    ///
    /// Steps must be strictly increasing across calls.
    pub fn record_responses(&mut self, outcome: BatchOutcome, step: u64) -> Result<()> {
        if let Some(last) = self.trace.last() {
            if step <= last.step {
                return Err(Error::Internal(format!(
                    "scheduler step {step} recorded after step {}",
                    last.step
                )));
            }
        }
        self.correct.add(outcome.n_correct);
        self.incorrect.add(outcome.n_incorrect);
        self.trace.push(TraceRow {
            step,
            eta_c: self.correct.current,
            eta_i: self.incorrect.current,
        });
        Ok(())
    }

    /// `(eta_c, eta_i)`.
    pub fn current_rates(&self) -> (f64, f64) {
        (self.correct.current, self.incorrect.current)
    }

    /// `(count_c, count_i)`.
    pub fn counts(&self) -> (u64, u64) {
        (self.correct.count, self.incorrect.count)
    }

    /// Current thresholds; `None` for a static schedule.
    pub fn thresholds(&self) -> (Option<u64>, Option<u64>) {
        (self.correct.threshold, self.incorrect.threshold)
    }

    /// How many times each rate has been updated so far.
    pub fn triggers(&self) -> (u64, u64) {
        (self.correct.triggers, self.incorrect.triggers)
    }

    pub fn export_trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRow> {
        self.trace
    }
}
