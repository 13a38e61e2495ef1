use rand::Rng;

use crate::error::Result;
use crate::tensor::{conv2d_backward, conv2d_forward, matmul, Conv2dGrads, Tensor};

/// Glorot-uniform draw: `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-limit..limit))
}

/// Fully connected layer, `y = x·W + b` with `W: in×out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Linear {
            weight: glorot(&[inputs, outputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = matmul(x, &self.weight)?;
        y.add_row_bias(&self.bias)?;
        Ok(y)
    }

    /// Returns `(dW, db)` and, when `need_input` is set, `dx`.
    pub fn backward(&self, x: &Tensor, upstream: &Tensor, need_input: bool) -> Result<(Tensor, Tensor, Option<Tensor>)> {
        let dw = matmul(&x.transpose()?, upstream)?;
        let db = upstream.sum_rows()?;
        let dx = if need_input {
            Some(matmul(upstream, &self.weight.transpose()?)?)
        } else {
            None
        };
        Ok((dw, db, dx))
    }
}

/// Valid stride-1 convolution layer, kernel `F×C×kh×kw`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub kernel: Tensor,
    pub bias: Tensor,
}

impl Conv {
    pub fn init<R: Rng + ?Sized>(in_channels: usize, filters: usize, size: usize, rng: &mut R) -> Self {
        let area = size * size;
        Conv {
            kernel: glorot(&[filters, in_channels, size, size], in_channels * area, filters * area, rng),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv2d_forward(x, &self.kernel, &self.bias)
    }

    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<Conv2dGrads> {
        conv2d_backward(x, &self.kernel, &self.bias, upstream)
    }
}
