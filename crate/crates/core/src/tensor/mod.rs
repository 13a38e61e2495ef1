//! Dense row-major tensors and the differentiable primitives the models are
//! built from.
//!
//! Every operation is a pure function over borrowed inputs. Backward passes are
//! written out by hand; there is no autodiff graph. All arithmetic is `f64` and
//! accumulation always runs left to right over the innermost summation index,
//! so results are reproducible bit-for-bit on any IEEE-754 platform.

mod conv;
mod ops;

pub use conv::{conv2d_backward, conv2d_forward, maxpool2d, maxpool2d_backward, Conv2dGrads};
pub use ops::{
    dropout, dropout_backward, relu_backward, relu_forward, softmax, softmax_cross_entropy,
};

use std::fmt;

use crate::error::{Error, Result};

/// An n-dimensional array of `f64` stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?} {:?}", self.shape, self.data)
        } else {
            write!(f, "Tensor{:?} [{} elements]", self.shape, self.data.len())
        }
    }
}

impl Tensor {
    /// Builds a tensor, checking that `data` holds exactly `product(shape)` values.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "shape {shape:?} has a zero-sized dimension"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Fills the tensor by calling `f` with each flat (row-major) index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        }
    }

    /// A 2-D tensor from nested rows. Panics on ragged input; test helper.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor {
            shape: vec![rows.len(), cols],
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Same data, new shape. Element count must match.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.shape.len() != rank {
            return Err(Error::Dimension(format!(
                "{what} must be rank {rank}, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Matrix transpose of a 2-D tensor.
    pub fn transpose(&self) -> Result<Tensor> {
        self.expect_rank(2, "transpose input")?;
        let (rows, cols) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j * rows + i] = self.data[i * cols + j];
            }
        }
        Ok(Tensor {
            shape: vec![cols, rows],
            data: out,
        })
    }

    /// Sums a 2-D tensor over its rows, yielding one value per column.
    pub fn sum_rows(&self) -> Result<Tensor> {
        self.expect_rank(2, "sum_rows input")?;
        let cols = self.shape[1];
        let mut out = vec![0.0; cols];
        for row in self.data.chunks_exact(cols) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Ok(Tensor {
            shape: vec![cols],
            data: out,
        })
    }

    /// Adds a length-`cols` bias to every row of a 2-D tensor, in place.
    pub fn add_row_bias(&mut self, bias: &Tensor) -> Result<()> {
        self.expect_rank(2, "add_row_bias input")?;
        if bias.shape != [self.shape[1]] {
            return Err(Error::Dimension(format!(
                "bias {:?} does not match row width of {:?}",
                bias.shape, self.shape
            )));
        }
        for row in self.data.chunks_exact_mut(self.shape[1]) {
            for (v, &b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Rows `start..end` of the leading dimension.
    pub fn slice_outer(&self, start: usize, end: usize) -> Result<Tensor> {
        let outer = *self.shape.first().unwrap_or(&0);
        if start >= end || end > outer {
            return Err(Error::Dimension(format!(
                "outer slice {start}..{end} out of bounds for shape {:?}",
                self.shape
            )));
        }
        let stride = self.data.len() / outer;
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Ok(Tensor {
            shape,
            data: self.data[start * stride..end * stride].to_vec(),
        })
    }

    /// Collects the given entries of the leading dimension, in order.
    pub fn gather_outer(&self, indices: &[usize]) -> Result<Tensor> {
        let outer = *self.shape.first().unwrap_or(&0);
        if indices.is_empty() {
            return Err(Error::Dimension("gather of zero rows".into()));
        }
        let stride = self.data.len() / outer;
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= outer {
                return Err(Error::Dimension(format!(
                    "row {i} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Ok(Tensor { shape, data })
    }
}

/// `c[i][j] = Σ_p a[i][p]·b[p][j]`, accumulated over `p` in increasing order.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::Dimension(format!(
            "matmul cannot combine {:?} with {:?}",
            a.shape, b.shape
        )));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut c = vec![0.0; m * n];
    // i-p-j order: each c[i][j] still receives its terms in increasing p.
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a.data[i * k + p];
            let b_row = &b.data[p * n..(p + 1) * n];
            for (cij, &bpj) in c_row.iter_mut().zip(b_row) {
                *cij += aip * bpj;
            }
        }
    }
    Ok(Tensor {
        shape: vec![m, n],
        data: c,
    })
}
