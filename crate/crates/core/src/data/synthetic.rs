use rand::Rng;

use super::{Dataset, DatasetKind, Split};
use crate::seed::{mix, stream};

/// A small learnable stand-in shaped like `kind`.
///
/// Each class gets a fixed random prototype image derived from `seed`; an
/// example is its class prototype plus uniform pixel noise. Train and test
/// splits generated with the same seed share prototypes but not examples.
/// Used for smoke runs and tests when the real datasets are not on disk.
pub fn synthetic(kind: DatasetKind, split: Split, n: usize, seed: u64) -> Dataset {
    let [c, h, w] = kind.example_shape();
    let stride = c * h * w;
    let mut proto_rng = stream(mix(seed, 0x5052_4F54));
    let prototypes: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..stride).map(|_| if proto_rng.gen::<f64>() < 0.3 { 200.0 } else { 30.0 }).collect())
        .collect();

    let salt = match split {
        Split::Train => 1,
        Split::Test => 2,
    };
    let mut rng = stream(mix(seed, salt));
    let mut pixels = Vec::with_capacity(n * stride);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..10);
        labels.push(label);
        pixels.extend(
            prototypes[label]
                .iter()
                .map(|&p| (p + rng.gen_range(-90.0..90.0)).clamp(0.0, 255.0) as u8),
        );
    }
    Dataset::from_bytes(kind, split, pixels, labels).expect("synthetic data is well formed")
}
