//! Deterministic seed derivation. Every random draw in the crate comes from a
//! `ChaCha8Rng` seeded with a value derived here, so a run is a pure function
//! of its master seed regardless of how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(master, path)`. Order and length of `path` both matter.
pub fn derive_seed(master_seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(master_seed);
    for &p in path {
        h = splitmix(h ^ splitmix(p));
    }
    splitmix(h ^ (path.len() as u64).wrapping_mul(GOLDEN))
}

pub(crate) fn rng_for(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, path))
}
