//! Dual variable learning rates.
//!
//! Training keeps two learning rates: `eta_c`, used for a batch whose
//! predictions were mostly correct, and `eta_i`, used otherwise. Each rate is
//! either static or follows a *variable threshold* schedule: a counter
//! accumulates that rate's responses (correct predictions for `eta_c`,
//! incorrect ones for `eta_i`), and whenever it reaches a threshold drawn
//! uniformly from `[lo, hi]` the rate moves by a fixed step of
//! `delta_percent`% of its initial value, the counter drops by the threshold
//! and a fresh threshold is drawn.
//!
//! [`DualRateConfig`] is the static description (and has a compact text
//! notation, see [`notation`]); [`Scheduler`] is the live state carried through
//! a training run.

pub mod notation;
mod scheduler;

pub use notation::{format_schedule_spec, parse_schedule_spec};
pub use scheduler::{BatchOutcome, Scheduler, TraceRow};

use crate::error::{Error, Result};

/// Default rate of change: 0.01% of the initial rate per trigger.
pub const DEFAULT_DELTA_PERCENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increase => 1.0,
            Direction::Decrease => -1.0,
        }
    }

    pub fn flipped(self) -> Direction {
        match self {
            Direction::Increase => Direction::Decrease,
            Direction::Decrease => Direction::Increase,
        }
    }
}

/// Inclusive integer range a threshold is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableThreshold {
    pub lo: u64,
    pub hi: u64,
    pub direction: Direction,
    /// Step size as a percentage of the initial rate.
    pub delta_percent: f64,
}

impl VariableThreshold {
    pub fn new(lo: u64, hi: u64, direction: Direction) -> Self {
        VariableThreshold {
            lo,
            hi,
            direction,
            delta_percent: DEFAULT_DELTA_PERCENT,
        }
    }

    /// `delta_percent / 100`.
    pub fn delta_fraction(&self) -> f64 {
        self.delta_percent / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMode {
    Static,
    Variable(VariableThreshold),
}

/// One learning rate's schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    pub initial: f64,
    pub mode: RateMode,
}

impl RateSchedule {
    pub fn fixed(initial: f64) -> Self {
        RateSchedule {
            initial,
            mode: RateMode::Static,
        }
    }

    pub fn variable(initial: f64, lo: u64, hi: u64, direction: Direction) -> Self {
        RateSchedule {
            initial,
            mode: RateMode::Variable(VariableThreshold::new(lo, hi, direction)),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self.mode, RateMode::Static)
    }

    /// Additive change per trigger, `delta_fraction · initial`; zero when static.
    pub fn step_size(&self) -> f64 {
        match self.mode {
            RateMode::Static => 0.0,
            RateMode::Variable(vt) => vt.delta_fraction() * self.initial,
        }
    }

    pub fn validate(&self, which: &str) -> Result<()> {
        if !(self.initial > 0.0) || !self.initial.is_finite() {
            return Err(Error::Config(format!(
                "{which}: initial learning rate must be positive, got {}",
                self.initial
            )));
        }
        if let RateMode::Variable(vt) = self.mode {
            if vt.lo == 0 {
                return Err(Error::Config(format!("{which}: threshold lower bound must be at least 1")));
            }
            if vt.lo > vt.hi {
                return Err(Error::Config(format!(
                    "{which}: threshold range {}-{} has lower bound above upper bound",
                    vt.lo, vt.hi
                )));
            }
            if !(vt.delta_percent > 0.0) || !vt.delta_percent.is_finite() {
                return Err(Error::Config(format!(
                    "{which}: rate of change must be positive, got {}%",
                    vt.delta_percent
                )));
            }
        }
        Ok(())
    }
}

/// Which rate a batch with exactly as many correct as incorrect responses uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TieRule {
    #[default]
    Incorrect,
    Correct,
}

/// The two schedules plus the tie rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRateConfig {
    pub correct: RateSchedule,
    pub incorrect: RateSchedule,
    pub tie: TieRule,
}

impl DualRateConfig {
    pub fn new(correct: RateSchedule, incorrect: RateSchedule) -> Self {
        DualRateConfig {
            correct,
            incorrect,
            tie: TieRule::default(),
        }
    }

    /// Both rates static and equal: ordinary single-rate training.
    pub fn single(eta: f64) -> Self {
        DualRateConfig::new(RateSchedule::fixed(eta), RateSchedule::fixed(eta))
    }

    pub fn validate(&self) -> Result<()> {
        self.correct.validate("etaC")?;
        self.incorrect.validate("etaI")
    }

    /// True for the static-single baseline shape.
    pub fn is_single_rate(&self) -> bool {
        self.correct.is_static() && self.incorrect.is_static() && self.correct.initial == self.incorrect.initial
    }

    pub fn is_static(&self) -> bool {
        self.correct.is_static() && self.incorrect.is_static()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(RateSchedule::variable(0.01, 50, 50, Direction::Increase).validate("x").is_ok());
        assert!(RateSchedule::variable(0.01, 51, 50, Direction::Increase).validate("x").is_err());
        assert!(RateSchedule::variable(0.01, 0, 5, Direction::Increase).validate("x").is_err());
        assert!(RateSchedule::fixed(0.0).validate("x").is_err());
        assert!(RateSchedule::fixed(f64::NAN).validate("x").is_err());
    }

    #[test]
    fn step_size_is_fraction_of_initial() {
        let s = RateSchedule::variable(0.01, 200, 200, Direction::Increase);
        assert!((s.step_size() - 1e-6).abs() < 1e-21);
        assert_eq!(RateSchedule::fixed(0.3).step_size(), 0.0);
    }
}
