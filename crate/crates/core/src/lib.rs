//! Neural-network training with dual, variably-updated learning rates.
//!
//! Every training batch is scored by how many of its predictions were
//! correct. A mostly-correct batch is trained with one learning rate
//! (`eta_c`), a mostly-incorrect batch with another (`eta_i`). Either rate can
//! drift: after a randomly drawn number of correct (or incorrect) responses it
//! moves by a fixed fraction of its starting value.
//!
//! The crate has no external numeric dependencies. It provides:
//!
//! * [`tensor`]: `f64` tensors and hand-differentiated ops (matmul, conv,
//!   pooling, ReLU, dropout, softmax cross-entropy)
//! * [`models`]: an MNIST MLP, an MNIST CNN and a CIFAR-10 CNN
//! * [`optim`]: SGD and Adagrad taking the learning rate per step
//! * [`schedule`]: the dual-rate scheduler and its text notation
//! * [`data`]: MNIST IDX and CIFAR-10 binary loaders, shuffling and batching
//! * [`harness`]: the trial runner, reports and the Welch t-test comparison
//! * [`search`]: staged baseline/threshold search
//!
//! The `dvlr` binary wraps the harness and search stages. The `book/`
//! directory walks through the method chapter by chapter; its code listings
//! are compiled as doctests of this crate.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod models;
pub mod optim;
pub mod schedule;
pub mod search;
pub mod seed;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/dual_rates.md")]
    mod dual_rates {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
