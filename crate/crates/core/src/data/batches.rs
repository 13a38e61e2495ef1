use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{mix, stream};
use crate::tensor::Tensor;

/// The example order and batch boundaries of one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub order: Vec<usize>,
    pub drop_last: bool,
}

impl BatchPlan {
    /// A permutation of `0..n` determined by `(seed, epoch)`.
    pub fn new(n: usize, batch_size: usize, seed: u64, epoch: u64, drop_last: bool) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if batch_size > n {
            return Err(Error::Config(format!(
                "batch size {batch_size} exceeds the {n} available examples"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(mix(seed, epoch)));
        Ok(BatchPlan {
            batch_size,
            order,
            drop_last,
        })
    }

    /// Index slices, one per batch.
    pub fn chunks(&self) -> impl Iterator<Item = &[usize]> {
        let size = self.batch_size;
        let drop_last = self.drop_last;
        self.order
            .chunks(size)
            .filter(move |c| !drop_last || c.len() == size)
    }

    pub fn num_batches(&self) -> usize {
        if self.drop_last {
            self.order.len() / self.batch_size
        } else {
            self.order.len().div_ceil(self.batch_size)
        }
    }
}

/// One materialised batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn gather(dataset: &Dataset, indices: &[usize]) -> Result<Batch> {
        Ok(Batch {
            images: dataset.images(indices)?,
            labels: indices.iter().map(|&i| dataset.labels()[i]).collect(),
        })
    }
}

/// Lazily yields the batches of one shuffled epoch; the final short batch is
/// kept.
pub fn make_batches(
    dataset: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<impl Iterator<Item = Result<Batch>> + '_> {
    let plan = BatchPlan::new(dataset.len(), batch_size, seed, epoch, false)?;
    let chunks: Vec<Vec<usize>> = plan.chunks().map(<[usize]>::to_vec).collect();
    Ok(chunks.into_iter().map(move |idx| Batch::gather(dataset, &idx)))
}
