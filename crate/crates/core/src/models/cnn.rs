use rand::Rng;

use super::layers::{Conv, Linear};
use super::mlp::positive_positions;
use crate::error::{Error, Result};
use crate::seed::Stream;
use crate::tensor::{
    dropout, dropout_backward, maxpool2d, maxpool2d_backward, relu_backward, relu_forward, Tensor,
};

fn expect_input(batch: &Tensor, c: usize, hw: usize, what: &str) -> Result<usize> {
    let n = batch.shape().first().copied().unwrap_or(0);
    if batch.shape() != [n, c, hw, hw] {
        return Err(Error::Dimension(format!(
            "{what} expects N×{c}×{hw}×{hw} input, got {:?}",
            batch.shape()
        )));
    }
    Ok(n)
}

/// MNIST CNN:
/// conv 1→10 (5×5) → pool → ReLU → conv 10→20 (5×5) → pool → ReLU →
/// fc 320→50 → ReLU → dropout → fc 50→10.
#[derive(Debug, Clone, PartialEq)]
pub struct MnistCnnModel {
    pub conv1: Conv,
    pub conv2: Conv,
    pub fc1: Linear,
    pub fc2: Linear,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone)]
pub struct MnistCnnCache {
    input: Tensor,
    conv1_out_shape: Vec<usize>,
    pool1: Tensor,
    pool1_idx: Vec<usize>,
    relu1: Tensor,
    conv2_out_shape: Vec<usize>,
    pool2: Tensor,
    pool2_idx: Vec<usize>,
    flat: Tensor,
    fc1_out: Tensor,
    dropout_mask: Tensor,
    dropped: Tensor,
}

impl MnistCnnModel {
    pub const DEFAULT_DROPOUT: f64 = 0.5;

    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        MnistCnnModel {
            conv1: Conv::init(1, 10, 5, rng),
            conv2: Conv::init(10, 20, 5, rng),
            fc1: Linear::init(320, 50, rng),
            fc2: Linear::init(50, 10, rng),
            dropout_rate: Self::DEFAULT_DROPOUT,
        }
    }

    pub fn forward(&self, batch: &Tensor, training: bool, rng: &mut Stream) -> Result<(Tensor, MnistCnnCache)> {
        let n = expect_input(batch, 1, 28, "MNIST CNN")?;
        let c1 = self.conv1.forward(batch)?;
        let (pool1, pool1_idx) = maxpool2d(&c1)?;
        let relu1 = relu_forward(&pool1);
        let c2 = self.conv2.forward(&relu1)?;
        let (pool2, pool2_idx) = maxpool2d(&c2)?;
        let flat = relu_forward(&pool2).reshape(&[n, 320])?;
        let fc1_out = self.fc1.forward(&flat)?;
        let (dropped, dropout_mask) = dropout(&relu_forward(&fc1_out), self.dropout_rate, rng, training)?;
        let logits = self.fc2.forward(&dropped)?;
        Ok((
            logits,
            MnistCnnCache {
                input: batch.clone(),
                conv1_out_shape: c1.shape().to_vec(),
                pool1,
                pool1_idx,
                relu1,
                conv2_out_shape: c2.shape().to_vec(),
                pool2,
                pool2_idx,
                flat,
                fc1_out,
                dropout_mask,
                dropped,
            },
        ))
    }

    /// Gradients in parameter order: conv1 k/b, conv2 k/b, fc1 W/b, fc2 W/b.
    pub fn backward(&self, cache: &MnistCnnCache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let n = cache.input.shape()[0];
        let (dw_fc2, db_fc2, d_dropped) = self.fc2.backward(&cache.dropped, grad_logits, true)?;
        let d_relu = dropout_backward(&d_dropped.expect("requested"), &cache.dropout_mask)?;
        let d_fc1 = relu_backward(&cache.fc1_out, &d_relu)?;
        let (dw_fc1, db_fc1, d_flat) = self.fc1.backward(&cache.flat, &d_fc1, true)?;
        let d_relu2 = d_flat.expect("requested").reshape(&[n, 20, 4, 4])?;
        let d_pool2 = relu_backward(&cache.pool2, &d_relu2)?;
        let d_c2 = maxpool2d_backward(&d_pool2, &cache.pool2_idx, &cache.conv2_out_shape)?;
        let g2 = self.conv2.backward(&cache.relu1, &d_c2)?;
        let d_pool1 = relu_backward(&cache.pool1, &g2.input)?;
        let d_c1 = maxpool2d_backward(&d_pool1, &cache.pool1_idx, &cache.conv1_out_shape)?;
        let g1 = self.conv1.backward(&cache.input, &d_c1)?;
        Ok(vec![g1.kernel, g1.bias, g2.kernel, g2.bias, dw_fc1, db_fc1, dw_fc2, db_fc2])
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1.kernel,
            &self.conv1.bias,
            &self.conv2.kernel,
            &self.conv2.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1.kernel,
            &mut self.conv1.bias,
            &mut self.conv2.kernel,
            &mut self.conv2.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]
    }
}

impl MnistCnnCache {
    pub(crate) fn kink_signature(&self) -> Vec<usize> {
        let mut sig = self.pool1_idx.clone();
        sig.extend(&self.pool2_idx);
        sig.push(usize::MAX);
        sig.extend(positive_positions(&self.pool1));
        sig.push(usize::MAX);
        sig.extend(positive_positions(&self.pool2));
        sig.push(usize::MAX);
        sig.extend(positive_positions(&self.fc1_out));
        sig
    }
}

/// CIFAR-10 CNN:
/// conv 3→6 (5×5) → ReLU → pool → conv 6→16 (5×5) → ReLU → pool →
/// fc 400→120 → ReLU → fc 120→84 → ReLU → fc 84→10.
#[derive(Debug, Clone, PartialEq)]
pub struct CifarCnnModel {
    pub conv1: Conv,
    pub conv2: Conv,
    pub fc1: Linear,
    pub fc2: Linear,
    pub fc3: Linear,
}

#[derive(Debug, Clone)]
pub struct CifarCnnCache {
    input: Tensor,
    conv1_out: Tensor,
    pool1_idx: Vec<usize>,
    pool1: Tensor,
    conv2_out: Tensor,
    pool2_idx: Vec<usize>,
    flat: Tensor,
    fc1_out: Tensor,
    relu_fc1: Tensor,
    fc2_out: Tensor,
    relu_fc2: Tensor,
}

impl CifarCnnModel {
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        CifarCnnModel {
            conv1: Conv::init(3, 6, 5, rng),
            conv2: Conv::init(6, 16, 5, rng),
            fc1: Linear::init(400, 120, rng),
            fc2: Linear::init(120, 84, rng),
            fc3: Linear::init(84, 10, rng),
        }
    }

    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, CifarCnnCache)> {
        let n = expect_input(batch, 3, 32, "CIFAR CNN")?;
        let conv1_out = self.conv1.forward(batch)?;
        let (pool1, pool1_idx) = maxpool2d(&relu_forward(&conv1_out))?;
        let conv2_out = self.conv2.forward(&pool1)?;
        let (pool2, pool2_idx) = maxpool2d(&relu_forward(&conv2_out))?;
        let flat = pool2.reshape(&[n, 400])?;
        let fc1_out = self.fc1.forward(&flat)?;
        let relu_fc1 = relu_forward(&fc1_out);
        let fc2_out = self.fc2.forward(&relu_fc1)?;
        let relu_fc2 = relu_forward(&fc2_out);
        let logits = self.fc3.forward(&relu_fc2)?;
        Ok((
            logits,
            CifarCnnCache {
                input: batch.clone(),
                conv1_out,
                pool1_idx,
                pool1,
                conv2_out,
                pool2_idx,
                flat,
                fc1_out,
                relu_fc1,
                fc2_out,
                relu_fc2,
            },
        ))
    }

    /// Gradients in parameter order: conv1 k/b, conv2 k/b, fc1 W/b, fc2 W/b, fc3 W/b.
    pub fn backward(&self, cache: &CifarCnnCache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let n = cache.input.shape()[0];
        let (dw3, db3, d) = self.fc3.backward(&cache.relu_fc2, grad_logits, true)?;
        let d = relu_backward(&cache.fc2_out, &d.expect("requested"))?;
        let (dw2, db2, d) = self.fc2.backward(&cache.relu_fc1, &d, true)?;
        let d = relu_backward(&cache.fc1_out, &d.expect("requested"))?;
        let (dw1, db1, d) = self.fc1.backward(&cache.flat, &d, true)?;
        let d_pool2 = d.expect("requested").reshape(&[n, 16, 5, 5])?;
        let d_relu2 = maxpool2d_backward(&d_pool2, &cache.pool2_idx, cache.conv2_out.shape())?;
        let d_c2 = relu_backward(&cache.conv2_out, &d_relu2)?;
        let g2 = self.conv2.backward(&cache.pool1, &d_c2)?;
        let d_relu1 = maxpool2d_backward(&g2.input, &cache.pool1_idx, cache.conv1_out.shape())?;
        let d_c1 = relu_backward(&cache.conv1_out, &d_relu1)?;
        let g1 = self.conv1.backward(&cache.input, &d_c1)?;
        Ok(vec![g1.kernel, g1.bias, g2.kernel, g2.bias, dw1, db1, dw2, db2, dw3, db3])
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        vec![
            &self.conv1.kernel,
            &self.conv1.bias,
            &self.conv2.kernel,
            &self.conv2.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
            &self.fc3.weight,
            &self.fc3.bias,
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1.kernel,
            &mut self.conv1.bias,
            &mut self.conv2.kernel,
            &mut self.conv2.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
            &mut self.fc3.weight,
            &mut self.fc3.bias,
        ]
    }
}

impl CifarCnnCache {
    pub(crate) fn kink_signature(&self) -> Vec<usize> {
        let mut sig = self.pool1_idx.clone();
        sig.extend(&self.pool2_idx);
        for t in [&self.conv1_out, &self.conv2_out, &self.fc1_out, &self.fc2_out] {
            sig.push(usize::MAX);
            sig.extend(positive_positions(t));
        }
        sig
    }
}
