//! Deterministic seed derivation.
//!
//! Every random stream in a run is a ChaCha8 generator seeded from the master
//! seed mixed with a path of labels (task index, purpose tag, ...). Streams
//! with the same path are identical regardless of which learner asks for
//! them, which keeps methods aligned on environment randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purpose tags.
pub mod tag {
    pub const ROLLOUT: u64 = 0x524f_4c4c;
    pub const INIT: u64 = 0x494e_4954;
    pub const META: u64 = 0x4d45_5441;
    pub const TASKGEN: u64 = 0x5441_534b;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `path` into `master` one label at a time.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
