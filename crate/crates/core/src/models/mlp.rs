use rand::Rng;

use super::layers::Linear;
use crate::error::{Error, Result};
use crate::tensor::{relu_backward, relu_forward, Tensor};

pub const INPUTS: usize = 784;
pub const HIDDEN: usize = 500;
pub const CLASSES: usize = 10;

/// 784 → 500 (ReLU) → 10.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub hidden: Linear,
    pub output: Linear,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub(crate) input: Tensor,
    pub(crate) pre_activation: Tensor,
    pub(crate) hidden: Tensor,
}

impl MlpModel {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        MlpModel {
            hidden: Linear::init(INPUTS, HIDDEN, rng),
            output: Linear::init(HIDDEN, CLASSES, rng),
        }
    }

    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, MlpCache)> {
        let n = batch.shape()[0];
        let flat_ok = batch.shape() == [n, INPUTS] || batch.shape() == [n, 1, 28, 28];
        if !flat_ok {
            return Err(Error::Dimension(format!(
                "MLP expects N×784 or N×1×28×28 input, got {:?}",
                batch.shape()
            )));
        }
        let input = batch.clone().reshape(&[n, INPUTS])?;
        let pre_activation = self.hidden.forward(&input)?;
        let hidden = relu_forward(&pre_activation);
        let logits = self.output.forward(&hidden)?;
        Ok((
            logits,
            MlpCache {
                input,
                pre_activation,
                hidden,
            },
        ))
    }

    /// Gradients in parameter order: W1, b1, W2, b2.
    pub fn backward(&self, cache: &MlpCache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let (dw2, db2, dh) = self.output.backward(&cache.hidden, grad_logits, true)?;
        let dh = dh.expect("requested");
        let dpre = relu_backward(&cache.pre_activation, &dh)?;
        let (dw1, db1, _) = self.hidden.backward(&cache.input, &dpre, false)?;
        Ok(vec![dw1, db1, dw2, db2])
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.hidden.weight, &self.hidden.bias, &self.output.weight, &self.output.bias]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

impl MlpCache {
    pub(crate) fn kink_signature(&self) -> Vec<usize> {
        positive_positions(&self.pre_activation)
    }
}

pub(crate) fn positive_positions(t: &Tensor) -> Vec<usize> {
    t.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i)
        .collect()
}
