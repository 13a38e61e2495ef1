//! SGD and Adagrad. The learning rate is an argument of every [`Optimizer::step`]
//! call and is never stored, so the scheduler can hand in a different rate on
//! each batch without touching accumulator state.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Added to `√G` in the Adagrad denominator.
pub const ADAGRAD_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adagrad => "adagrad",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            other => Err(Error::Config(format!(
                "unknown optimizer `{other}` (expected sgd or adagrad)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    /// Per-parameter running sum of squared gradients (Adagrad only; empty for SGD).
    accumulators: Vec<Tensor>,
    epsilon: f64,
}

impl Optimizer {
    /// An optimizer whose accumulators match `params` in count and shape.
    pub fn new(kind: OptimizerKind, params: &[&Tensor]) -> Self {
        let accumulators = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::Adagrad => params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        };
        Optimizer {
            kind,
            accumulators,
            epsilon: ADAGRAD_EPSILON,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn accumulators(&self) -> &[Tensor] {
        &self.accumulators
    }

    /// One update with learning rate `eta`.
    ///
    /// * SGD: `p ← p − η·g`
    /// * Adagrad: `G ← G + g²; p ← p − η·g / (√G + ε)`
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], eta: f64) -> Result<()> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {eta}"
            )));
        }
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            p.expect_same_shape(g)?;
        }

        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= eta * gv;
                    }
                }
            }
            OptimizerKind::Adagrad => {
                if self.accumulators.len() != params.len() {
                    return Err(Error::Dimension(format!(
                        "optimizer holds {} accumulators for {} parameters",
                        self.accumulators.len(),
                        params.len()
                    )));
                }
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
                    p.expect_same_shape(acc)?;
                    for ((pv, &gv), av) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(acc.data_mut().iter_mut())
                    {
                        *av += gv * gv;
                        *pv -= eta * gv / (av.sqrt() + self.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
