//! Seed derivation. Every random stream in a run is a ChaCha8 generator seeded
//! from a 64-bit value mixed out of the experiment's base seed, so a trial is
//! reproducible on any platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes two 64-bit values into one.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(17))
}

/// Seed of trial `index` under `base_seed`.
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    mix(base_seed, index as u64)
}

/// Purpose-specific sub-seeds inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Dropout,
    Shuffle,
    Scheduler,
}

impl Purpose {
    fn salt(self) -> u64 {
        match self {
            Purpose::Init => 0x494E_4954,
            Purpose::Dropout => 0x4452_4F50,
            Purpose::Shuffle => 0x5348_5546,
            Purpose::Scheduler => 0x5343_4844,
        }
    }
}

pub fn derive(seed: u64, purpose: Purpose) -> u64 {
    mix(seed, purpose.salt())
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
