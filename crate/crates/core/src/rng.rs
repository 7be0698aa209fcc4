//! Seed plumbing. Every random stream in the crate is a `ChaCha8Rng` whose
//! seed is derived from a user seed plus a stream label, so results do not
//! depend on call order across independent components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent child seed from `(seed, stream)`.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stream labels, kept in one place so no two components share one.
pub(crate) mod stream {
    pub const GEN_INIT: u64 = 1;
    pub const DISC_INIT: u64 = 2;
    pub const TRAIN_LOOP: u64 = 3;
    pub const TRAIN_DATA: u64 = 10;
    pub const TEST_COVARIATES: u64 = 11;
    pub const METHOD: u64 = 12;
    pub const SAMPLING: u64 = 13;
    pub const TEST_RESPONSES: u64 = 14;
}
